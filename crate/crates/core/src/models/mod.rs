//! The four regressor families behind one fit/predict contract.

mod forest;
mod linear;
mod mlp;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{fit_forest, predict_forest, ForestConfig, ForestModel};
pub use linear::{fit_linear, predict_linear, LinearModel};
pub use mlp::{
    fit_mlp, mlp_gradient, predict_mlp, Layer, MinMaxScaler, MlpConfig, MlpGradient, MlpModel,
};
pub use tree::{fit_tree, fit_tree_subsampled, predict_tree, Node, TreeConfig, TreeModel};

/// Version of the JSON model document layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("DegenerateDesign: {0}")]
    DegenerateDesign(String),
    #[error("DimensionMismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("NonFiniteLoss: training diverged at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("EmptyDataset")]
    EmptyDataset,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("UnsupportedVersion: model document version {0}")]
    UnsupportedVersion(u32),
    #[error("Serialization: {0}")]
    Serialization(String),
}

impl ModelError {
    pub fn name(&self) -> &'static str {
        match self {
            ModelError::DegenerateDesign(_) => "DegenerateDesign",
            ModelError::DimensionMismatch { .. } => "DimensionMismatch",
            ModelError::NonFiniteLoss { .. } => "NonFiniteLoss",
            ModelError::EmptyDataset => "EmptyDataset",
            ModelError::InvalidConfig(_) => "InvalidConfig",
            ModelError::UnsupportedVersion(_) => "UnsupportedVersion",
            ModelError::Serialization(_) => "Serialization",
        }
    }
}

pub(crate) fn check_columns(expected: usize, x: &ArrayView2<'_, f64>) -> Result<(), ModelError> {
    if x.ncols() != expected {
        return Err(ModelError::DimensionMismatch { expected, found: x.ncols() });
    }
    Ok(())
}

pub(crate) fn check_targets(x: &ArrayView2<'_, f64>, y: &ArrayView1<'_, f64>) -> Result<(), ModelError> {
    if x.nrows() != y.len() {
        return Err(ModelError::DimensionMismatch { expected: x.nrows(), found: y.len() });
    }
    Ok(())
}

/// Regressor family, in the column order of the best-model comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Mlp,
    Dtr,
    Rf,
    Lr,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [ModelFamily::Mlp, ModelFamily::Dtr, ModelFamily::Rf, ModelFamily::Lr];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Mlp => "mlp",
            ModelFamily::Dtr => "dtr",
            ModelFamily::Rf => "rf",
            ModelFamily::Lr => "lr",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" | "nn" => Ok(ModelFamily::Mlp),
            "dtr" | "tree" => Ok(ModelFamily::Dtr),
            "rf" | "forest" => Ok(ModelFamily::Rf),
            "lr" | "linear" => Ok(ModelFamily::Lr),
            other => Err(format!("unknown model family `{other}` (expected lr, mlp, dtr or rf)")),
        }
    }
}

/// A fully specified model configuration: one row of a sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Lr,
    Mlp(MlpConfig),
    Dtr(TreeConfig),
    Rf(ForestConfig),
}

impl ModelSpec {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelSpec::Lr => ModelFamily::Lr,
            ModelSpec::Mlp(_) => ModelFamily::Mlp,
            ModelSpec::Dtr(_) => ModelFamily::Dtr,
            ModelSpec::Rf(_) => ModelFamily::Rf,
        }
    }

    /// Short label in the style of the result tables: `[100 90 80]` for a
    /// network, `[2 10]` for (min leaf, min parent), the tree count for a forest.
    pub fn descriptor(&self) -> String {
        fn bracket(values: &[usize]) -> String {
            let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            format!("[{}]", parts.join(" "))
        }
        match self {
            ModelSpec::Lr => "ols".to_string(),
            ModelSpec::Mlp(c) => bracket(&c.hidden_layers),
            ModelSpec::Dtr(c) => bracket(&[c.min_leaf_size, c.min_parent_size]),
            ModelSpec::Rf(c) => c.n_trees.to_string(),
        }
    }

    pub fn fit(&self, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<Model, ModelError> {
        Ok(match self {
            ModelSpec::Lr => Model::Linear(fit_linear(x, y)?),
            ModelSpec::Mlp(c) => Model::Mlp(fit_mlp(x, y, c)?),
            ModelSpec::Dtr(c) => Model::Tree(fit_tree(x, y, c)?),
            ModelSpec::Rf(c) => Model::Forest(fit_forest(x, y, c)?),
        })
    }
}

/// Any trained regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Linear(LinearModel),
    Mlp(MlpModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: Model,
}

impl Model {
    pub fn family(&self) -> ModelFamily {
        match self {
            Model::Linear(_) => ModelFamily::Lr,
            Model::Mlp(_) => ModelFamily::Mlp,
            Model::Tree(_) => ModelFamily::Dtr,
            Model::Forest(_) => ModelFamily::Rf,
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, ModelError> {
        match self {
            Model::Linear(m) => predict_linear(m, x),
            Model::Mlp(m) => predict_mlp(m, x),
            Model::Tree(m) => predict_tree(m, x),
            Model::Forest(m) => predict_forest(m, x),
        }
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument { format_version: MODEL_FORMAT_VERSION, model: self.clone() };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model, ModelError> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version =
            serde_json::from_str(text).map_err(|e| ModelError::Serialization(e.to_string()))?;
        if v.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(v.format_version));
        }
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| ModelError::Serialization(e.to_string()))?;
        Ok(doc.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64, n: usize, p: usize) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::<f64>::from_shape_fn((n, p), |_| rng.random_range(-3.0..3.0));
        let y = Array1::from_shape_fn(n, |i| {
            x[[i, 0]].sin() * 10.0 + x[[i, p - 1]] * x[[i, 0]] + rng.random_range(-0.5..0.5)
        });
        (x, y)
    }

    fn specs() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Lr,
            ModelSpec::Mlp(MlpConfig { hidden_layers: vec![4, 3], epochs: 20, ..Default::default() }),
            ModelSpec::Dtr(TreeConfig { min_parent_size: 2, ..Default::default() }),
            ModelSpec::Rf(ForestConfig { n_trees: 5, mtry: Some(2), seed: 3, ..Default::default() }),
        ]
    }

    #[test]
    fn json_roundtrip_preserves_predictions_bitwise() {
        let (x, y) = problem(1, 40, 3);
        for spec in specs() {
            let model = spec.fit(x.view(), y.view()).unwrap();
            let text = model.to_json();
            let back = Model::from_json(&text).unwrap();
            assert_eq!(back, model, "{:?}", spec.family());
            let a = model.predict(x.view()).unwrap();
            let b = back.predict(x.view()).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn version_is_checked() {
        let (x, y) = problem(1, 10, 2);
        let text = ModelSpec::Lr.fit(x.view(), y.view()).unwrap().to_json();
        let text = text.replace("\"format_version\": 1", "\"format_version\": 99");
        assert_eq!(Model::from_json(&text).unwrap_err(), ModelError::UnsupportedVersion(99));
    }

    #[test]
    fn all_predictors_are_row_permutation_equivariant() {
        let (x, y) = problem(7, 30, 3);
        let perm: Vec<usize> = (0..30).rev().collect();
        let xp = x.select(ndarray::Axis(0), &perm);
        for spec in specs() {
            let model = spec.fit(x.view(), y.view()).unwrap();
            let a = model.predict(x.view()).unwrap();
            let b = model.predict(xp.view()).unwrap();
            for (k, &r) in perm.iter().enumerate() {
                assert_eq!(a[r].to_bits(), b[k].to_bits());
            }
        }
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let (x, y) = problem(2, 20, 3);
        let (x2, _) = problem(2, 5, 2);
        for spec in specs() {
            let model = spec.fit(x.view(), y.view()).unwrap();
            assert_eq!(
                model.predict(x2.view()).unwrap_err(),
                ModelError::DimensionMismatch { expected: 3, found: 2 }
            );
        }
    }

    #[test]
    fn descriptors_follow_table_layout() {
        let nn = ModelSpec::Mlp(MlpConfig { hidden_layers: vec![100, 90, 80], ..Default::default() });
        assert_eq!(nn.descriptor(), "[100 90 80]");
        let dtr = ModelSpec::Dtr(TreeConfig { min_leaf_size: 2, min_parent_size: 10, ..Default::default() });
        assert_eq!(dtr.descriptor(), "[2 10]");
        let rf = ModelSpec::Rf(ForestConfig { n_trees: 150, ..Default::default() });
        assert_eq!(rf.descriptor(), "150");
        assert_eq!("nn".parse::<ModelFamily>().unwrap(), ModelFamily::Mlp);
    }
}
