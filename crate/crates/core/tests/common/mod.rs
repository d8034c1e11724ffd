//! Independent reference computations shared by the integration tests and
//! the acceptance runner. Nothing here calls into the code under test except
//! to evaluate a model's forward pass.
#![allow(dead_code)]

use emissionscope::models::{predict_mlp, MlpModel, Node, TreeModel};
use ndarray::{Array1, Array2};

/// First split found by trying every feature and every midpoint between
/// consecutive distinct values, scoring each by directly computed child SSE.
/// Returns `(feature, threshold)`; ties keep the earliest candidate in
/// (feature, threshold) order.
pub fn brute_force_split(x: &Array2<f64>, y: &Array1<f64>, min_leaf: usize) -> Option<(usize, f64)> {
    let n = y.len();
    let sse = |idx: &[usize]| -> f64 {
        let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum()
    };
    let all: Vec<usize> = (0..n).collect();
    let parent = sse(&all);
    let scale = parent.max(1e-300);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.ncols() {
        let mut values: Vec<f64> = x.column(f).to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let mut t = (pair[0] + pair[1]) / 2.0;
            if t <= pair[0] {
                t = pair[1];
            }
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[[i, f]] < t);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let child = sse(&l) + sse(&r);
            if best.is_none_or(|(_, _, b)| child < b - 1e-9 * scale) {
                best = Some((f, t, child));
            }
        }
    }
    best.filter(|&(_, _, child)| child < parent - 1e-9 * scale).map(|(f, t, _)| (f, t))
}

/// Mean squared error of the network on a batch.
pub fn mlp_loss(model: &MlpModel, x: &Array2<f64>, y: &Array1<f64>) -> f64 {
    let p = predict_mlp(model, x.view()).unwrap();
    p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Central-difference derivative of the loss for every parameter, laid out
/// layer by layer as (weights row-major, then biases).
pub fn finite_difference_gradient(model: &MlpModel, x: &Array2<f64>, y: &Array1<f64>, eps: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..model.layers.len() {
        let (rows, cols) = model.layers[k].weights.dim();
        for i in 0..rows {
            for j in 0..cols {
                let mut plus = model.clone();
                plus.layers[k].weights[[i, j]] += eps;
                let mut minus = model.clone();
                minus.layers[k].weights[[i, j]] -= eps;
                out.push((mlp_loss(&plus, x, y) - mlp_loss(&minus, x, y)) / (2.0 * eps));
            }
        }
        for i in 0..rows {
            let mut plus = model.clone();
            plus.layers[k].biases[i] += eps;
            let mut minus = model.clone();
            minus.layers[k].biases[i] -= eps;
            out.push((mlp_loss(&plus, x, y) - mlp_loss(&minus, x, y)) / (2.0 * eps));
        }
    }
    out
}

/// Relative difference with a floor on the denominator, so components that
/// are both essentially zero compare on an absolute scale.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Solves `A z = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * z[k]).sum();
        z[row] = (b[row] - s) / a[row][row];
    }
    z
}

/// Least squares with intercept via the normal equations; returns
/// `(intercept, weights)`.
pub fn normal_equations(x: &Array2<f64>, y: &Array1<f64>) -> (f64, Vec<f64>) {
    let (n, p) = x.dim();
    let design = |i: usize, j: usize| if j == 0 { 1.0 } else { x[[i, j - 1]] };
    let a: Vec<Vec<f64>> = (0..=p)
        .map(|j| (0..=p).map(|k| (0..n).map(|i| design(i, j) * design(i, k)).sum()).collect())
        .collect();
    let b: Vec<f64> = (0..=p).map(|j| (0..n).map(|i| design(i, j) * y[i]).sum()).collect();
    let z = solve(a, b);
    (z[0], z[1..].to_vec())
}

/// Checks the size constraints of a fitted tree; returns a description of
/// the first violation.
pub fn tree_violation(tree: &TreeModel, min_leaf: usize, min_parent: usize, max_splits: usize) -> Option<String> {
    let mut splits = 0;
    for (i, node) in tree.nodes.iter().enumerate() {
        match node {
            Node::Leaf { count, .. } if *count < min_leaf => {
                return Some(format!("leaf {i} holds {count} < {min_leaf} rows"));
            }
            Node::Split { count, left, right, .. } => {
                splits += 1;
                if *count < min_parent {
                    return Some(format!("split node {i} holds {count} < {min_parent} rows"));
                }
                let children = tree.nodes[*left].count() + tree.nodes[*right].count();
                if children != *count {
                    return Some(format!("split node {i}: children hold {children} of {count} rows"));
                }
            }
            _ => {}
        }
    }
    (splits > max_splits).then(|| format!("{splits} splits exceed budget {max_splits}"))
}

pub fn r2(actual: &[f64], predicted: &[f64]) -> f64 {
    let m = actual.iter().sum::<f64>() / actual.len() as f64;
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    let sst: f64 = actual.iter().map(|a| (a - m) * (a - m)).sum();
    1.0 - sse / sst
}
