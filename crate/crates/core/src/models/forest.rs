//! Bagged ensemble of regression trees.

use ndarray::{ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, TreeConfig, TreeModel};
use super::{check_columns, check_targets, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub tree: TreeConfig,
    pub bootstrap: bool,
    /// Features considered per split; `None` means all of them.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            tree: TreeConfig::default(),
            bootstrap: true,
            mtry: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    /// A forest made of the first `k` member trees. Because tree `i` depends
    /// only on `(seed, i)`, this equals a forest fitted with `n_trees = k`.
    pub fn prefix(&self, k: usize) -> ForestModel {
        let k = k.min(self.trees.len());
        ForestModel {
            config: ForestConfig { n_trees: k, ..self.config.clone() },
            trees: self.trees[..k].to_vec(),
        }
    }
}

/// Child RNG for tree `index`: the master seed selects the key and the tree
/// index selects an independent ChaCha stream.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn fit_forest(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    cfg: &ForestConfig,
) -> Result<ForestModel, ModelError> {
    check_targets(&x, &y)?;
    cfg.tree.validate()?;
    let (n, p) = x.dim();
    if n == 0 || n < cfg.tree.min_leaf_size {
        return Err(ModelError::EmptyDataset);
    }
    if cfg.n_trees == 0 {
        return Err(ModelError::InvalidConfig("n_trees must be at least 1".into()));
    }
    let mtry = cfg.mtry.unwrap_or(p);
    if mtry == 0 || mtry > p {
        return Err(ModelError::InvalidConfig(format!("mtry {mtry} not in 1..={p}")));
    }

    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(cfg.seed, i);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let subsample = (mtry < p).then_some((mtry, &mut rng));
            grow(x, y, rows, &cfg.tree, subsample)
        })
        .collect();
    Ok(ForestModel { config: cfg.clone(), trees })
}

/// Mean of member predictions, accumulated in tree order as a running mean
/// so that identical members reproduce their common value exactly.
pub fn predict_forest(model: &ForestModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, ModelError> {
    let first = model
        .trees
        .first()
        .ok_or_else(|| ModelError::InvalidConfig("forest has no trees".into()))?;
    check_columns(first.n_features, &x)?;
    let mut mean = vec![0.0; x.nrows()];
    for (k, tree) in model.trees.iter().enumerate() {
        let pred = super::predict_tree(tree, x)?;
        let weight = (k + 1) as f64;
        for (m, p) in mean.iter_mut().zip(pred) {
            *m += (p - *m) / weight;
        }
    }
    Ok(mean)
}
