//! Feature matrix plus per-gas targets, with CSV export/import and a JSON
//! provenance sidecar.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::GasId;
use crate::windowing::{ChannelMask, LabelPolicy, WindowConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),
    #[error("NonFinite: {0}")]
    NonFinite(String),
    #[error("MalformedHeader: {0}")]
    MalformedHeader(String),
    #[error("MalformedRow: line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("MissingChannel: dataset has no target for {0}")]
    MissingChannel(GasId),
    #[error("Io: {0}")]
    Io(String),
}

impl DatasetError {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetError::DimensionMismatch(_) => "DimensionMismatch",
            DatasetError::NonFinite(_) => "NonFinite",
            DatasetError::MalformedHeader(_) => "MalformedHeader",
            DatasetError::MalformedRow { .. } => "MalformedRow",
            DatasetError::MissingChannel(_) => "MissingChannel",
            DatasetError::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for DatasetError {
    fn from(e: std::io::Error) -> Self {
        DatasetError::Io(e.to_string())
    }
}

/// How a dataset was produced; written as the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProvenance {
    pub window: WindowConfig,
    pub label_policy: LabelPolicy,
    pub channel_mask: ChannelMask,
    pub sensors: Vec<String>,
    /// Windows cut from the first sensor before gap drops.
    pub windows_total: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    x: Array2<f64>,
    y: BTreeMap<GasId, Array1<f64>>,
    window_center_t: Vec<f64>,
    provenance: Option<DatasetProvenance>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        x: Array2<f64>,
        y: BTreeMap<GasId, Array1<f64>>,
        window_center_t: Vec<f64>,
        provenance: Option<DatasetProvenance>,
    ) -> Result<Self, DatasetError> {
        let n = x.nrows();
        if feature_names.len() != x.ncols() {
            return Err(DatasetError::DimensionMismatch(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        if window_center_t.len() != n {
            return Err(DatasetError::DimensionMismatch(format!(
                "{} window centers for {n} rows",
                window_center_t.len()
            )));
        }
        for (gas, target) in &y {
            if target.len() != n {
                return Err(DatasetError::DimensionMismatch(format!(
                    "target {gas} has {} values for {n} rows",
                    target.len()
                )));
            }
            if !target.iter().all(|v| v.is_finite()) {
                return Err(DatasetError::NonFinite(format!("target {gas}")));
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(DatasetError::NonFinite("feature matrix".into()));
        }
        if !window_center_t.iter().all(|v| v.is_finite()) {
            return Err(DatasetError::NonFinite("window centers".into()));
        }
        Ok(Dataset { feature_names, x, y, window_center_t, provenance })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn gases(&self) -> impl Iterator<Item = GasId> + '_ {
        self.y.keys().copied()
    }

    pub fn target(&self, gas: GasId) -> Result<ArrayView1<'_, f64>, DatasetError> {
        self.y.get(&gas).map(|a| a.view()).ok_or(DatasetError::MissingChannel(gas))
    }

    pub fn window_center_t(&self) -> &[f64] {
        &self.window_center_t
    }

    pub fn provenance(&self) -> Option<&DatasetProvenance> {
        self.provenance.as_ref()
    }

    /// Sub-dataset with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            x: self.x.select(Axis(0), rows),
            y: self.y.iter().map(|(g, v)| (*g, v.select(Axis(0), rows))).collect(),
            window_center_t: rows.iter().map(|&r| self.window_center_t[r]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// SHA-256 over feature names, window centers, features, and targets.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_rows() as u64).to_le_bytes());
        h.update((self.n_features() as u64).to_le_bytes());
        for name in &self.feature_names {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
        }
        for v in &self.window_center_t {
            h.update(v.to_le_bytes());
        }
        for v in self.x.iter() {
            h.update(v.to_le_bytes());
        }
        for (gas, target) in &self.y {
            h.update(gas.as_str().as_bytes());
            for v in target {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// `window_center_t,<features...>,y_<gas>...`, numbers in shortest
    /// round-trip form so import reproduces the dataset exactly.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), DatasetError> {
        let mut header = vec!["window_center_t".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.extend(self.y.keys().map(|g| format!("y_{g}")));
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::new();
        for r in 0..self.n_rows() {
            line.clear();
            line.push_str(&self.window_center_t[r].to_string());
            for v in self.x.row(r) {
                line.push(',');
                line.push_str(&v.to_string());
            }
            for target in self.y.values() {
                line.push(',');
                line.push_str(&target[r].to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.provenance).expect("provenance serializes")
    }

    pub fn read_csv<R: Read>(
        source: R,
        provenance: Option<DatasetProvenance>,
    ) -> Result<Dataset, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(source);
        let header = reader
            .headers()
            .map_err(|e| DatasetError::MalformedHeader(e.to_string()))?
            .clone();
        if header.get(0) != Some("window_center_t") {
            return Err(DatasetError::MalformedHeader(
                "first column must be window_center_t".into(),
            ));
        }
        let mut feature_names = Vec::new();
        let mut gases = Vec::new();
        for name in header.iter().skip(1) {
            match name.strip_prefix("y_") {
                Some(g) => gases.push(g.parse::<GasId>().map_err(DatasetError::MalformedHeader)?),
                None if gases.is_empty() => feature_names.push(name.to_string()),
                None => {
                    return Err(DatasetError::MalformedHeader(format!(
                        "feature column `{name}` after target columns"
                    )))
                }
            }
        }
        let p = feature_names.len();
        let mut centers = Vec::new();
        let mut flat = Vec::new();
        let mut targets: Vec<Vec<f64>> = vec![Vec::new(); gases.len()];
        for (i, row) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let row = row.map_err(|e| DatasetError::MalformedRow { line, reason: e.to_string() })?;
            let parse = |k: usize| -> Result<f64, DatasetError> {
                row[k].parse::<f64>().map_err(|_| DatasetError::MalformedRow {
                    line,
                    reason: format!("cannot parse {:?} in column {}", &row[k], &header[k]),
                })
            };
            centers.push(parse(0)?);
            for k in 0..p {
                flat.push(parse(1 + k)?);
            }
            for (g, t) in targets.iter_mut().enumerate() {
                t.push(parse(1 + p + g)?);
            }
        }
        let x = Array2::from_shape_vec((centers.len(), p), flat)
            .map_err(|e| DatasetError::DimensionMismatch(e.to_string()))?;
        let y = gases.into_iter().zip(targets).map(|(g, t)| (g, Array1::from(t))).collect();
        Dataset::new(feature_names, x, y, centers, provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small() -> Dataset {
        let mut y = BTreeMap::new();
        y.insert(GasId::Co, array![1.0, 2.0, 3.0]);
        y.insert(GasId::Nox, array![0.1, 0.2, 1.0 / 3.0]);
        Dataset::new(
            vec!["a".into(), "b".into()],
            array![[1.0, -2.5], [0.1 + 0.2, 4.0], [1e-300, 7.0]],
            y,
            vec![0.125, 0.245, 0.365],
            None,
        )
        .unwrap()
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let ds = small();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("window_center_t,a,b,y_co,y_nox\n"));
        let back = Dataset::read_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.fingerprint(), ds.fingerprint());
    }

    #[test]
    fn shape_checks() {
        let mut y = BTreeMap::new();
        y.insert(GasId::Co, array![1.0]);
        let err = Dataset::new(vec!["a".into()], array![[1.0], [2.0]], y, vec![0.0, 1.0], None)
            .unwrap_err();
        assert_eq!(err.name(), "DimensionMismatch");
        let err = Dataset::new(
            vec!["a".into()],
            array![[f64::NAN]],
            BTreeMap::new(),
            vec![0.0],
            None,
        )
        .unwrap_err();
        assert_eq!(err.name(), "NonFinite");
    }

    #[test]
    fn select_rows_and_fingerprint() {
        let ds = small();
        let sub = ds.select_rows(&[2, 0]);
        assert_eq!(sub.n_rows(), 2);
        assert_eq!(sub.target(GasId::Co).unwrap().to_vec(), vec![3.0, 1.0]);
        assert_eq!(sub.window_center_t(), &[0.365, 0.125]);
        assert_ne!(sub.fingerprint(), ds.fingerprint());
        assert_eq!(ds.target(GasId::Co2).unwrap_err(), DatasetError::MissingChannel(GasId::Co2));
    }
}
