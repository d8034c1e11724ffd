//! Parsing of inertial-sensor and gas-analyzer CSV logs into validated series.
//!
//! Both formats are plain CSV with an exact lowercase header. A file may start
//! with comment lines beginning with `#`; the only recognised directive is
//! `# epoch_offset_s=<seconds>`, which records the wall-clock offset of the
//! stream start so that files from independent devices can be aligned.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accelerometer full scale in g.
pub const ACCEL_FULL_SCALE_G: f64 = 200.0;
/// Gyroscope full scale in degrees per second.
pub const GYRO_FULL_SCALE_DPS: f64 = 7000.0;
/// Allowed relative deviation of a sample interval from the nominal period.
pub const RATE_TOLERANCE: f64 = 0.2;
pub const DEFAULT_RATE_HZ: f64 = 100.0;

pub const INERTIAL_HEADER: [&str; 7] = [
    "t_s",
    "accel_x_g",
    "accel_y_g",
    "accel_z_g",
    "gyro_x_dps",
    "gyro_y_dps",
    "gyro_z_dps",
];

pub const PEMS_HEADER: [&str; 11] = [
    "t_s", "no_ppm", "no2_ppm", "co_ppm", "co2_pct", "o2_pct", "so2_ppm", "ch4_ppm", "h2s_ppm",
    "t_air_c", "t_gas_c",
];
/// `t_s` plus the four mandatory gas columns.
const PEMS_REQUIRED_COLUMNS: usize = 5;

const EPOCH_DIRECTIVE: &str = "epoch_offset_s=";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("MalformedHeader: {0}")]
    MalformedHeader(String),
    #[error("MalformedRow: line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("InvalidNumber: line {line}, column `{column}`: cannot parse {value:?}")]
    InvalidNumber { line: u64, column: String, value: String },
    #[error("NonMonotonicTime: line {line}: t = {t} does not exceed previous t = {previous}")]
    NonMonotonicTime { line: u64, t: f64, previous: f64 },
    #[error("SamplingGap: line {line}: interval {dt} s is outside ±20% of the nominal {period} s")]
    SamplingGap { line: u64, dt: f64, period: f64 },
    #[error("RangeViolation: line {line}, column `{column}`: {value} outside [{min}, {max}]")]
    RangeViolation { line: u64, column: String, value: f64, min: f64, max: f64 },
    #[error("EmptyStream: no data rows")]
    EmptyStream,
    #[error("MissingChannel: {0} not present")]
    MissingChannel(GasId),
    #[error("UnitMismatch: {0}")]
    UnitMismatch(String),
    #[error("InvalidRate: {0} Hz")]
    InvalidRate(f64),
    #[error("Io: {0}")]
    Io(String),
}

impl IngestError {
    pub fn name(&self) -> &'static str {
        match self {
            IngestError::MalformedHeader(_) => "MalformedHeader",
            IngestError::MalformedRow { .. } => "MalformedRow",
            IngestError::InvalidNumber { .. } => "InvalidNumber",
            IngestError::NonMonotonicTime { .. } => "NonMonotonicTime",
            IngestError::SamplingGap { .. } => "SamplingGap",
            IngestError::RangeViolation { .. } => "RangeViolation",
            IngestError::EmptyStream => "EmptyStream",
            IngestError::MissingChannel(_) => "MissingChannel",
            IngestError::UnitMismatch(_) => "UnitMismatch",
            IngestError::InvalidRate(_) => "InvalidRate",
            IngestError::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for IngestError {
    fn from(e: std::io::Error) -> Self {
        IngestError::Io(e.to_string())
    }
}

/// Measured (or derived) gas-analyzer channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GasId {
    Co,
    No,
    No2,
    Nox,
    Co2,
    O2,
    So2,
    Ch4,
    H2s,
    TAir,
    TGas,
}

/// Gases that carry learning targets; everything else is retained but never modeled.
pub const MODELED_GASES: [GasId; 5] = [GasId::Co, GasId::No, GasId::No2, GasId::Nox, GasId::Co2];

impl GasId {
    pub const ALL: [GasId; 11] = [
        GasId::Co,
        GasId::No,
        GasId::No2,
        GasId::Nox,
        GasId::Co2,
        GasId::O2,
        GasId::So2,
        GasId::Ch4,
        GasId::H2s,
        GasId::TAir,
        GasId::TGas,
    ];

    /// Lowercase short name, as used in CLI flags and dataset column suffixes.
    pub fn as_str(self) -> &'static str {
        match self {
            GasId::Co => "co",
            GasId::No => "no",
            GasId::No2 => "no2",
            GasId::Nox => "nox",
            GasId::Co2 => "co2",
            GasId::O2 => "o2",
            GasId::So2 => "so2",
            GasId::Ch4 => "ch4",
            GasId::H2s => "h2s",
            GasId::TAir => "t_air",
            GasId::TGas => "t_gas",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            GasId::Co2 | GasId::O2 => Unit::Percent,
            GasId::TAir | GasId::TGas => Unit::Celsius,
            _ => Unit::Ppm,
        }
    }

    /// Analyzer measurement range `(min, max)` in the channel's unit.
    pub fn range(self) -> (f64, f64) {
        match self {
            GasId::No => (0.0, 5000.0),
            GasId::No2 => (0.0, 1000.0),
            // NO + NO2
            GasId::Nox => (0.0, 6000.0),
            GasId::Co => (0.0, 8000.0),
            GasId::Co2 => (0.0, 50.0),
            GasId::O2 => (0.0, 25.0),
            GasId::So2 => (0.0, 5000.0),
            GasId::Ch4 => (0.0, 50_000.0),
            GasId::H2s => (0.0, 500.0),
            GasId::TAir => (-20.0, 120.0),
            GasId::TGas => (-20.0, 1250.0),
        }
    }

    pub fn is_modeled(self) -> bool {
        MODELED_GASES.contains(&self)
    }

    fn pems_column(self) -> Option<&'static str> {
        let idx = match self {
            GasId::No => 1,
            GasId::No2 => 2,
            GasId::Co => 3,
            GasId::Co2 => 4,
            GasId::O2 => 5,
            GasId::So2 => 6,
            GasId::Ch4 => 7,
            GasId::H2s => 8,
            GasId::TAir => 9,
            GasId::TGas => 10,
            GasId::Nox => return None,
        };
        Some(PEMS_HEADER[idx])
    }

    fn from_pems_column(column: &str) -> Option<GasId> {
        GasId::ALL
            .into_iter()
            .find(|g| g.pems_column() == Some(column))
    }
}

impl fmt::Display for GasId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GasId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        GasId::ALL
            .into_iter()
            .find(|g| g.as_str() == lower)
            .ok_or_else(|| format!("unknown gas `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Ppm,
    Percent,
    Celsius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub t: f64,
    pub accel_x: f64,
    pub accel_y: f64,
    pub accel_z: f64,
    pub gyro_x: f64,
    pub gyro_y: f64,
    pub gyro_z: f64,
}

impl SensorSample {
    fn from_fields(v: [f64; 7]) -> Self {
        SensorSample {
            t: v[0],
            accel_x: v[1],
            accel_y: v[2],
            accel_z: v[3],
            gyro_x: v[4],
            gyro_y: v[5],
            gyro_z: v[6],
        }
    }

    fn fields(&self) -> [f64; 7] {
        [
            self.t,
            self.accel_x,
            self.accel_y,
            self.accel_z,
            self.gyro_x,
            self.gyro_y,
            self.gyro_z,
        ]
    }
}

/// Uniform-rate samples from one physical inertial sensor.
///
/// Constructed only through validation, so every instance has strictly
/// increasing finite timestamps with intervals within ±20% of the nominal
/// period and all channels within sensor full scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorSeries {
    sensor_id: String,
    rate_hz: f64,
    epoch_offset_s: Option<f64>,
    samples: Vec<SensorSample>,
}

impl SensorSeries {
    pub fn new(
        sensor_id: impl Into<String>,
        rate_hz: f64,
        samples: Vec<SensorSample>,
    ) -> Result<Self, IngestError> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(IngestError::InvalidRate(rate_hz));
        }
        if samples.is_empty() {
            return Err(IngestError::EmptyStream);
        }
        let period = 1.0 / rate_hz;
        for (i, s) in samples.iter().enumerate() {
            // Header is line 1, first data row is line 2.
            let line = i as u64 + 2;
            validate_sample(s, line)?;
            if i > 0 {
                let prev = samples[i - 1].t;
                if s.t <= prev {
                    return Err(IngestError::NonMonotonicTime { line, t: s.t, previous: prev });
                }
                let dt = s.t - prev;
                if (dt - period).abs() > RATE_TOLERANCE * period {
                    return Err(IngestError::SamplingGap { line, dt, period });
                }
            }
        }
        Ok(SensorSeries {
            sensor_id: sensor_id.into(),
            rate_hz,
            epoch_offset_s: None,
            samples,
        })
    }

    pub fn with_epoch_offset(mut self, offset_s: Option<f64>) -> Self {
        self.epoch_offset_s = offset_s;
        self
    }

    pub fn sensor_id(&self) -> &str {
        &self.sensor_id
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn epoch_offset_s(&self) -> Option<f64> {
        self.epoch_offset_s
    }

    pub fn samples(&self) -> &[SensorSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes the series in the inertial CSV schema. Numbers use the shortest
    /// representation that parses back to the identical `f64`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        if let Some(offset) = self.epoch_offset_s {
            writeln!(out, "# {EPOCH_DIRECTIVE}{offset}")?;
        }
        writeln!(out, "{}", INERTIAL_HEADER.join(","))?;
        for s in &self.samples {
            let f = s.fields();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                f[0], f[1], f[2], f[3], f[4], f[5], f[6]
            )?;
        }
        Ok(())
    }
}

fn validate_sample(s: &SensorSample, line: u64) -> Result<(), IngestError> {
    if !s.t.is_finite() || s.t < 0.0 {
        return Err(IngestError::RangeViolation {
            line,
            column: INERTIAL_HEADER[0].into(),
            value: s.t,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    let fields = s.fields();
    for (col, &value) in fields.iter().enumerate().skip(1) {
        let limit = if col <= 3 { ACCEL_FULL_SCALE_G } else { GYRO_FULL_SCALE_DPS };
        if !(value.abs() <= limit) {
            return Err(IngestError::RangeViolation {
                line,
                column: INERTIAL_HEADER[col].into(),
                value,
                min: -limit,
                max: limit,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub value: f64,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub t: f64,
    pub values: BTreeMap<GasId, Reading>,
}

impl EmissionRecord {
    pub fn get(&self, gas: GasId) -> Option<f64> {
        self.values.get(&gas).map(|r| r.value)
    }
}

/// Time-ordered gas-analyzer records sharing one channel set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmissionSeries {
    records: Vec<EmissionRecord>,
    gases: BTreeSet<GasId>,
    epoch_offset_s: Option<f64>,
}

impl EmissionSeries {
    /// Validates monotonic time, a uniform gas set, and analyzer ranges.
    /// NOX may only be present when it equals NO + NO2.
    pub fn new(records: Vec<EmissionRecord>) -> Result<Self, IngestError> {
        let first = records.first().ok_or(IngestError::EmptyStream)?;
        let gases: BTreeSet<GasId> = first.values.keys().copied().collect();
        for (i, rec) in records.iter().enumerate() {
            let line = i as u64 + 2;
            if !rec.t.is_finite() {
                return Err(IngestError::RangeViolation {
                    line,
                    column: "t_s".into(),
                    value: rec.t,
                    min: f64::NEG_INFINITY,
                    max: f64::INFINITY,
                });
            }
            if i > 0 && rec.t <= records[i - 1].t {
                return Err(IngestError::NonMonotonicTime {
                    line,
                    t: rec.t,
                    previous: records[i - 1].t,
                });
            }
            if rec.values.len() != gases.len() || !rec.values.keys().all(|g| gases.contains(g)) {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: "gas set differs from the first record".into(),
                });
            }
            for (&gas, reading) in &rec.values {
                if reading.unit != gas.unit() {
                    return Err(IngestError::UnitMismatch(format!(
                        "{gas} tagged {:?}, expected {:?}",
                        reading.unit,
                        gas.unit()
                    )));
                }
                let (min, max) = gas.range();
                if !(reading.value >= min && reading.value <= max) {
                    return Err(IngestError::RangeViolation {
                        line,
                        column: gas.pems_column().unwrap_or("nox").into(),
                        value: reading.value,
                        min,
                        max,
                    });
                }
            }
        }
        Ok(EmissionSeries { records, gases, epoch_offset_s: None })
    }

    pub fn with_epoch_offset(mut self, offset_s: Option<f64>) -> Self {
        self.epoch_offset_s = offset_s;
        self
    }

    pub fn records(&self) -> &[EmissionRecord] {
        &self.records
    }

    pub fn gases(&self) -> &BTreeSet<GasId> {
        &self.gases
    }

    pub fn epoch_offset_s(&self) -> Option<f64> {
        self.epoch_offset_s
    }

    pub fn contains(&self, gas: GasId) -> bool {
        self.gases.contains(&gas)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record times in seconds since stream start.
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Magnitudes of one channel in record order.
    pub fn channel(&self, gas: GasId) -> Result<Vec<f64>, IngestError> {
        if !self.contains(gas) {
            return Err(IngestError::MissingChannel(gas));
        }
        Ok(self.records.iter().map(|r| r.values[&gas].value).collect())
    }

    /// Writes the series in the PEMS CSV schema, emitting the shortest header
    /// prefix that covers every measured channel. Derived NOX is not written.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), IngestError> {
        let last_col = self
            .gases
            .iter()
            .filter_map(|g| g.pems_column())
            .filter_map(|c| PEMS_HEADER.iter().position(|h| *h == c))
            .max()
            .unwrap_or(0)
            .max(PEMS_REQUIRED_COLUMNS - 1);
        let columns = &PEMS_HEADER[..=last_col];
        let gases: Vec<GasId> = columns[1..]
            .iter()
            .map(|c| GasId::from_pems_column(c).expect("pems column"))
            .collect();
        for &g in &gases {
            if !self.contains(g) {
                return Err(IngestError::MissingChannel(g));
            }
        }
        if let Some(offset) = self.epoch_offset_s {
            writeln!(out, "# {EPOCH_DIRECTIVE}{offset}")?;
        }
        writeln!(out, "{}", columns.join(","))?;
        for rec in &self.records {
            write!(out, "{}", rec.t)?;
            for g in &gases {
                write!(out, ",{}", rec.values[g].value)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Splits leading `#` comment lines from the CSV body, returning the epoch
/// offset directive if one is present.
fn split_preamble(text: &str) -> Result<(Option<f64>, &str, u64), IngestError> {
    let mut offset = None;
    let mut rest = text;
    let mut skipped = 0u64;
    while rest.starts_with('#') {
        let end = rest.find('\n').map(|i| i + 1).unwrap_or(rest.len());
        let line = rest[1..end].trim();
        if let Some(v) = line.strip_prefix(EPOCH_DIRECTIVE) {
            let parsed: f64 = v.trim().parse().map_err(|_| IngestError::InvalidNumber {
                line: skipped + 1,
                column: "epoch_offset_s".into(),
                value: v.trim().into(),
            })?;
            if !parsed.is_finite() {
                return Err(IngestError::InvalidNumber {
                    line: skipped + 1,
                    column: "epoch_offset_s".into(),
                    value: v.trim().into(),
                });
            }
            offset = Some(parsed);
        }
        rest = &rest[end..];
        skipped += 1;
    }
    Ok((offset, rest, skipped))
}

fn read_utf8<R: Read>(mut source: R) -> Result<String, IngestError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| IngestError::MalformedRow {
        line: 0,
        reason: format!("input is not UTF-8: {e}"),
    })
}

fn csv_reader(body: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(body.as_bytes())
}

fn parse_number(raw: &str, line: u64, column: &str) -> Result<f64, IngestError> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::InvalidNumber {
            line,
            column: column.into(),
            value: raw.into(),
        }),
    }
}

/// Parses one sensor's inertial CSV log.
pub fn parse_inertial_csv<R: Read>(
    source: R,
    sensor_id: &str,
    rate_hz: f64,
) -> Result<SensorSeries, IngestError> {
    let text = read_utf8(source)?;
    let (offset, body, skipped) = split_preamble(&text)?;
    let mut reader = csv_reader(body);
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h.map_err(|e| IngestError::MalformedHeader(e.to_string()))?,
        None => return Err(IngestError::MalformedHeader("missing header".into())),
    };
    let names: Vec<&str> = header.iter().collect();
    if names != INERTIAL_HEADER {
        return Err(IngestError::MalformedHeader(format!(
            "expected `{}`, found `{}`",
            INERTIAL_HEADER.join(","),
            names.join(",")
        )));
    }
    let mut samples = Vec::new();
    for (i, row) in rows.enumerate() {
        let line = skipped + i as u64 + 2;
        let row = row.map_err(|e| IngestError::MalformedRow { line, reason: e.to_string() })?;
        if row.len() != INERTIAL_HEADER.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", INERTIAL_HEADER.len(), row.len()),
            });
        }
        let mut v = [0.0; 7];
        for (k, raw) in row.iter().enumerate() {
            v[k] = parse_number(raw, line, INERTIAL_HEADER[k])?;
        }
        samples.push(SensorSample::from_fields(v));
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyStream);
    }
    SensorSeries::new(sensor_id, rate_hz, samples)
        .map_err(|e| shift_line(e, skipped))
        .map(|s| s.with_epoch_offset(offset))
}

/// Parses a gas-analyzer CSV log. Columns after `co2_pct` are optional but
/// must appear as a contiguous prefix of the schema.
pub fn parse_pems_csv<R: Read>(source: R) -> Result<EmissionSeries, IngestError> {
    let text = read_utf8(source)?;
    let (offset, body, skipped) = split_preamble(&text)?;
    let mut reader = csv_reader(body);
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h.map_err(|e| IngestError::MalformedHeader(e.to_string()))?,
        None => return Err(IngestError::MalformedHeader("missing header".into())),
    };
    let names: Vec<&str> = header.iter().collect();
    if names.len() < PEMS_REQUIRED_COLUMNS
        || names.len() > PEMS_HEADER.len()
        || names[..] != PEMS_HEADER[..names.len()]
    {
        return Err(IngestError::MalformedHeader(format!(
            "expected a prefix of `{}` covering at least `{}`, found `{}`",
            PEMS_HEADER.join(","),
            PEMS_HEADER[..PEMS_REQUIRED_COLUMNS].join(","),
            names.join(",")
        )));
    }
    let gases: Vec<GasId> = names[1..]
        .iter()
        .map(|c| GasId::from_pems_column(c).expect("validated header"))
        .collect();
    let mut records = Vec::new();
    for (i, row) in rows.enumerate() {
        let line = skipped + i as u64 + 2;
        let row = row.map_err(|e| IngestError::MalformedRow { line, reason: e.to_string() })?;
        if row.len() != names.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", names.len(), row.len()),
            });
        }
        let t = parse_number(&row[0], line, names[0])?;
        let mut values = BTreeMap::new();
        for (k, &gas) in gases.iter().enumerate() {
            let value = parse_number(&row[k + 1], line, names[k + 1])?;
            values.insert(gas, Reading { value, unit: gas.unit() });
        }
        records.push(EmissionRecord { t, values });
    }
    if records.is_empty() {
        return Err(IngestError::EmptyStream);
    }
    EmissionSeries::new(records)
        .map_err(|e| shift_line(e, skipped))
        .map(|s| s.with_epoch_offset(offset))
}

/// Adjusts reported line numbers for comment lines that preceded the header.
fn shift_line(err: IngestError, skipped: u64) -> IngestError {
    if skipped == 0 {
        return err;
    }
    match err {
        IngestError::NonMonotonicTime { line, t, previous } => {
            IngestError::NonMonotonicTime { line: line + skipped, t, previous }
        }
        IngestError::SamplingGap { line, dt, period } => {
            IngestError::SamplingGap { line: line + skipped, dt, period }
        }
        IngestError::RangeViolation { line, column, value, min, max } => {
            IngestError::RangeViolation { line: line + skipped, column, value, min, max }
        }
        IngestError::MalformedRow { line, reason } => {
            IngestError::MalformedRow { line: line + skipped, reason }
        }
        other => other,
    }
}

/// Returns a copy of `series` with a NOX channel equal to NO + NO2 at every record.
pub fn derive_nox(series: &EmissionSeries) -> Result<EmissionSeries, IngestError> {
    for gas in [GasId::No, GasId::No2] {
        if !series.contains(gas) {
            return Err(IngestError::MissingChannel(gas));
        }
    }
    let mut records = series.records.clone();
    for rec in &mut records {
        let no = rec.values[&GasId::No];
        let no2 = rec.values[&GasId::No2];
        if no.unit != Unit::Ppm || no2.unit != Unit::Ppm {
            return Err(IngestError::UnitMismatch(format!(
                "NO is {:?} and NO2 is {:?}; both must be ppm",
                no.unit, no2.unit
            )));
        }
        rec.values.insert(
            GasId::Nox,
            Reading { value: no.value + no2.value, unit: Unit::Ppm },
        );
    }
    let mut gases = series.gases.clone();
    gases.insert(GasId::Nox);
    Ok(EmissionSeries { records, gases, epoch_offset_s: series.epoch_offset_s })
}
