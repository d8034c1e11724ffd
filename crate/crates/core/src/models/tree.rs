//! Greedy binary regression tree minimizing the children's sum of squared
//! errors (variance reduction).

use std::collections::VecDeque;

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_columns, check_targets, ModelError};

/// Relative tolerance under which two candidate SSE reductions count as tied,
/// and under which a reduction counts as no improvement.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Global budget of split nodes; `None` means training rows minus one.
    pub max_splits: Option<usize>,
    pub min_leaf_size: usize,
    pub min_parent_size: usize,
    /// Seeds per-split feature subsampling in [`fit_tree_subsampled`].
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_splits: None, min_leaf_size: 1, min_parent_size: 10, seed: 0 }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.min_leaf_size == 0 {
            return Err(ModelError::InvalidConfig("min_leaf_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tree node; children are indices into the preorder node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Mean training target reaching this node.
        mean: f64,
        count: usize,
    },
    Leaf {
        value: f64,
        count: usize,
    },
}

impl Node {
    pub fn count(&self) -> usize {
        match self {
            Node::Split { count, .. } | Node::Leaf { count, .. } => *count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub config: TreeConfig,
    pub n_features: usize,
    /// Preorder; the root is node 0.
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. }))
    }

    /// Index of the leaf a row is routed to: `< threshold` goes left.
    pub fn leaf_index(&self, row: ArrayView1<'_, f64>) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }
}

/// Mean taken relative to the first target, so a node whose targets are all
/// equal reproduces that value exactly.
fn node_mean(y: &[f64], rows: &[usize]) -> f64 {
    let first = y[rows[0]];
    first + rows.iter().map(|&r| y[r] - first).sum::<f64>() / rows.len() as f64
}

pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Drop in SSE relative to the parent.
    pub reduction: f64,
}

/// Best SSE-reducing split of a node, honoring the leaf-size constraint.
/// `sorted[f]` lists the node's rows ordered by feature `f`; `cols[f]` is that
/// feature's column. Ties go to the lower feature index, then the lower
/// threshold.
pub(crate) fn best_split(
    cols: &[Vec<f64>],
    y: &[f64],
    sorted: &[Vec<usize>],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let rows = &sorted[0];
    let n = rows.len();
    let mean = node_mean(y, rows);
    let parent_sse: f64 = rows.iter().map(|&r| (y[r] - mean) * (y[r] - mean)).sum();
    if parent_sse == 0.0 {
        return None;
    }
    // Centered targets keep the prefix sums small and well conditioned.
    let total: f64 = rows.iter().map(|&r| y[r] - mean).sum();
    let parent_score = total * total / n as f64;
    let tol = TIE_TOLERANCE * parent_sse;

    let mut best: Option<SplitChoice> = None;
    for &f in features {
        let order = &sorted[f];
        let col = &cols[f];
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += y[order[i]] - mean;
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let lo = col[order[i]];
            let hi = col[order[i + 1]];
            if lo >= hi {
                continue;
            }
            let right_sum = total - left_sum;
            let reduction = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / n_right as f64
                - parent_score;
            if best.as_ref().is_none_or(|b| reduction > b.reduction + tol) {
                let mut threshold = 0.5 * (lo + hi);
                if threshold <= lo {
                    threshold = hi;
                }
                best = Some(SplitChoice { feature: f, threshold, reduction });
            }
        }
    }
    best.filter(|b| b.reduction > tol)
}

enum Slot {
    Pending,
    Leaf { value: f64, count: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize, mean: f64, count: usize },
}

/// Grows a tree over `rows` (duplicates allowed, as in a bootstrap sample).
/// Nodes are expanded breadth-first so a binding split budget trims the
/// deepest levels. With `mtry`, each split considers a fresh random subset of
/// that many features drawn from `rng`.
pub(crate) fn grow(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    rows: Vec<usize>,
    cfg: &TreeConfig,
    mut subsample: Option<(usize, &mut ChaCha8Rng)>,
) -> TreeModel {
    let p = x.ncols();
    let max_splits = cfg.max_splits.unwrap_or(rows.len().saturating_sub(1));
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let y = y.to_vec();
    let all_features: Vec<usize> = (0..p).collect();
    // Stable sorts keep equal values in row order, and stable partitions
    // below preserve each child's ordering.
    let sorted: Vec<Vec<usize>> = cols
        .iter()
        .map(|col| {
            let mut order = rows.clone();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            order
        })
        .collect();
    let mut goes_left = vec![false; x.nrows()];
    let mut slots = vec![Slot::Pending];
    let mut queue = VecDeque::from([(0usize, sorted)]);
    let mut splits = 0usize;

    while let Some((slot, sorted)) = queue.pop_front() {
        let rows = &sorted[0];
        let count = rows.len();
        let mean = node_mean(&y, rows);
        let can_split = count >= cfg.min_parent_size
            && count >= 2 * cfg.min_leaf_size
            && splits < max_splits;
        let choice = if can_split {
            let features = match subsample.as_mut() {
                Some((mtry, rng)) if *mtry < p => {
                    let mut f = sample(*rng, p, *mtry).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => all_features.clone(),
            };
            best_split(&cols, &y, &sorted, &features, cfg.min_leaf_size)
        } else {
            None
        };
        match choice {
            None => slots[slot] = Slot::Leaf { value: mean, count },
            Some(c) => {
                splits += 1;
                let col = &cols[c.feature];
                for &r in rows {
                    goes_left[r] = col[r] < c.threshold;
                }
                let (left_sorted, right_sorted): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
                    .iter()
                    .map(|order| order.iter().partition::<Vec<usize>, _>(|&&r| goes_left[r]))
                    .unzip();
                let left = slots.len();
                let right = left + 1;
                slots.push(Slot::Pending);
                slots.push(Slot::Pending);
                slots[slot] = Slot::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                    mean,
                    count,
                };
                queue.push_back((left, left_sorted));
                queue.push_back((right, right_sorted));
            }
        }
    }

    let mut nodes = Vec::with_capacity(slots.len());
    to_preorder(&slots, 0, &mut nodes);
    TreeModel { config: cfg.clone(), n_features: p, nodes }
}

fn to_preorder(slots: &[Slot], i: usize, out: &mut Vec<Node>) -> usize {
    let at = out.len();
    match slots[i] {
        Slot::Leaf { value, count } => out.push(Node::Leaf { value, count }),
        Slot::Split { feature, threshold, left, right, mean, count } => {
            out.push(Node::Split { feature, threshold, left: 0, right: 0, mean, count });
            let l = to_preorder(slots, left, out);
            let r = to_preorder(slots, right, out);
            if let Node::Split { left, right, .. } = &mut out[at] {
                *left = l;
                *right = r;
            }
        }
        Slot::Pending => unreachable!("every queued slot is resolved"),
    }
    at
}

fn check_fit_input(
    x: &ArrayView2<'_, f64>,
    y: &ArrayView1<'_, f64>,
    cfg: &TreeConfig,
) -> Result<(), ModelError> {
    check_targets(x, y)?;
    cfg.validate()?;
    if x.nrows() == 0 || x.nrows() < cfg.min_leaf_size {
        return Err(ModelError::EmptyDataset);
    }
    Ok(())
}

pub fn fit_tree(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    cfg: &TreeConfig,
) -> Result<TreeModel, ModelError> {
    check_fit_input(&x, &y, cfg)?;
    Ok(grow(x, y, (0..x.nrows()).collect(), cfg, None))
}

/// Like [`fit_tree`], but each split considers only `mtry` random features
/// drawn from an RNG seeded with `cfg.seed`.
pub fn fit_tree_subsampled(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    cfg: &TreeConfig,
    mtry: usize,
) -> Result<TreeModel, ModelError> {
    check_fit_input(&x, &y, cfg)?;
    if mtry == 0 || mtry > x.ncols() {
        return Err(ModelError::InvalidConfig(format!("mtry {mtry} not in 1..={}", x.ncols())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(grow(x, y, (0..x.nrows()).collect(), cfg, Some((mtry, &mut rng))))
}

pub fn predict_tree(model: &TreeModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, ModelError> {
    check_columns(model.n_features, &x)?;
    Ok(x.rows().into_iter().map(|r| model.predict_row(r)).collect())
}
