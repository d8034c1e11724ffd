use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_columns, check_targets, ModelError};

/// Ordinary least squares: `ŷ = intercept + weights · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Least-squares fit through an SVD of the column-centered design matrix.
///
/// Centering removes the intercept from the decomposition; singular values
/// below `max(n, p) · σ_max · ε` are treated as zero, which yields the
/// minimum-norm weight vector when the design is rank deficient.
pub fn fit_linear(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<LinearModel, ModelError> {
    check_targets(&x, &y)?;
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(ModelError::DegenerateDesign(format!("{n} rows × {p} columns")));
    }
    let col_means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
    let y_mean = y.sum() / n as f64;
    let centered = DMatrix::from_fn(n, p, |i, j| x[[i, j]] - col_means[j]);
    let target = DVector::from_fn(n, |i, _| y[i] - y_mean);

    let svd = centered.svd(true, true);
    let s_max = svd.singular_values.max();
    let weights = if s_max == 0.0 {
        DVector::zeros(p)
    } else {
        let eps = n.max(p) as f64 * s_max * f64::EPSILON;
        svd.solve(&target, eps)
            .map_err(|e| ModelError::DegenerateDesign(e.to_string()))?
    };
    let weights: Vec<f64> = weights.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&col_means).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { weights, intercept })
}

pub fn predict_linear(model: &LinearModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, ModelError> {
    check_columns(model.weights.len(), &x)?;
    Ok(x.rows()
        .into_iter()
        .map(|row| model.intercept + row.iter().zip(&model.weights).map(|(a, w)| a * w).sum::<f64>())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line() {
        let m = fit_linear(array![[1.0], [2.0], [3.0]].view(), array![2.0, 4.0, 6.0].view()).unwrap();
        assert!(m.intercept.abs() < 1e-12);
        assert!((m.weights[0] - 2.0).abs() < 1e-12);
        let m = fit_linear(array![[0.0], [1.0]].view(), array![1.0, 3.0].view()).unwrap();
        assert!((m.intercept - 1.0).abs() < 1e-12);
        assert!((m.weights[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn predict_examples() {
        let m = LinearModel { weights: vec![2.0], intercept: 0.0 };
        assert_eq!(predict_linear(&m, array![[5.0]].view()).unwrap(), vec![10.0]);
        let flat = LinearModel { weights: vec![0.0, 0.0], intercept: 3.5 };
        let p = predict_linear(&flat, array![[1.0, 2.0], [-7.0, 1e6]].view()).unwrap();
        assert_eq!(p, vec![3.5, 3.5]);
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        // Two identical columns: any split w1 + w2 = 2 fits; minimum norm is (1, 1).
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]];
        let m = fit_linear(x.view(), array![2.0, 4.0, 6.0, 8.0].view()).unwrap();
        assert!((m.weights[0] - 1.0).abs() < 1e-10);
        assert!((m.weights[1] - 1.0).abs() < 1e-10);
        assert!(m.intercept.abs() < 1e-10);
    }

    #[test]
    fn identical_rows_fit_the_mean() {
        let x = array![[2.0, 5.0], [2.0, 5.0], [2.0, 5.0]];
        let m = fit_linear(x.view(), array![1.0, 2.0, 6.0].view()).unwrap();
        assert_eq!(m.weights, vec![0.0, 0.0]);
        assert!((m.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_mismatch() {
        let empty = Array2::<f64>::zeros((0, 2));
        let err = fit_linear(empty.view(), Array1::zeros(0).view()).unwrap_err();
        assert_eq!(err.name(), "DegenerateDesign");
        let err = fit_linear(array![[1.0]].view(), array![1.0, 2.0].view()).unwrap_err();
        assert_eq!(err.name(), "DimensionMismatch");
        let m = LinearModel { weights: vec![1.0, 2.0], intercept: 0.0 };
        assert_eq!(
            predict_linear(&m, array![[1.0]].view()).unwrap_err(),
            ModelError::DimensionMismatch { expected: 2, found: 1 }
        );
    }

    fn sse(m: &LinearModel, x: &Array2<f64>, y: &Array1<f64>) -> f64 {
        predict_linear(m, x.view())
            .unwrap()
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum()
    }

    #[test]
    fn local_optimality_under_weight_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let x = Array2::from_shape_fn((30, 4), |_| rng.random_range(-5.0..5.0));
            let y = Array1::from_shape_fn(30, |_| rng.random_range(-10.0..10.0));
            let m = fit_linear(x.view(), y.view()).unwrap();
            let base = sse(&m, &x, &y);
            for j in 0..4 {
                for d in [-1e-3, 1e-3] {
                    let mut q = m.clone();
                    q.weights[j] += d;
                    assert!(base <= sse(&q, &x, &y));
                }
            }
        }
    }
}
