mod common;

use emissionscope::metrics::{compute_metrics, DenominatorMode, MetricValue};
use emissionscope::models::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn linear_fit_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..5 {
        let x = Array2::from_shape_fn((50, 7), |_| rng.random_range(-10.0..10.0));
        let y = Array1::from_shape_fn(50, |_| rng.random_range(-100.0..100.0));
        let model = fit_linear(x.view(), y.view()).unwrap();
        let (intercept, weights) = common::normal_equations(&x, &y);
        assert!((model.intercept - intercept).abs() < 1e-8, "{} vs {intercept}", model.intercept);
        for (a, b) in model.weights.iter().zip(&weights) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..20u64 {
        let inputs = rng.random_range(1..=4);
        let depth = rng.random_range(1..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=5)).collect();
        let batch = rng.random_range(1..=8);
        let cfg = MlpConfig { hidden_layers: hidden, seed: case, normalize_inputs: false, ..Default::default() };
        let model = MlpModel::init(inputs, &cfg, None).unwrap();
        let x = Array2::from_shape_fn((batch, inputs), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(batch, |_| rng.random_range(-2.0..2.0));
        let analytic: Vec<f64> = mlp_gradient(&model, x.view(), y.view())
            .unwrap()
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied().collect::<Vec<_>>())
            .collect();
        let numeric = common::finite_difference_gradient(&model, &x, &y, 1e-5);
        assert_eq!(analytic.len(), numeric.len());
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!(common::relative_error(*a, *n) < 1e-4, "case {case}: {a} vs {n}");
        }
    }
}

#[test]
fn mlp_gradient_applies_the_scaler() {
    let cfg = MlpConfig { hidden_layers: vec![3], seed: 4, ..Default::default() };
    let x = Array2::from_shape_fn((6, 2), |(i, j)| (i * 10 + j * 3) as f64);
    let y = Array1::from_shape_fn(6, |i| i as f64);
    let scaler = MinMaxScaler::fit(x.view());
    let model = MlpModel::init(2, &cfg, Some(scaler)).unwrap();
    let analytic = mlp_gradient(&model, x.view(), y.view()).unwrap();
    let numeric = common::finite_difference_gradient(&model, &x, &y, 1e-5);
    let flat: Vec<f64> = analytic.layers.iter().flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied().collect::<Vec<_>>()).collect();
    for (a, n) in flat.iter().zip(&numeric) {
        assert!(common::relative_error(*a, *n) < 1e-4);
    }
}

fn small_dataset() -> impl Strategy<Value = (Array2<f64>, Array1<f64>)> {
    (2usize..=12, 1usize..=2).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(0i32..6, n * p),
            prop::collection::vec(0i32..5, n),
        )
            .prop_map(move |(xs, ys)| {
                let x = Array2::from_shape_vec((n, p), xs.into_iter().map(f64::from).collect()).unwrap();
                (x, Array1::from_iter(ys.into_iter().map(f64::from)))
            })
    })
}

fn first_split(tree: &TreeModel) -> Option<(usize, f64)> {
    match tree.nodes[0] {
        Node::Split { feature, threshold, .. } => Some((feature, threshold)),
        Node::Leaf { .. } => None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn first_split_is_the_exhaustive_optimum((x, y) in small_dataset(), min_leaf in 1usize..=3) {
        let cfg = TreeConfig { min_leaf_size: min_leaf, min_parent_size: 1, max_splits: Some(1), seed: 0 };
        prop_assume!(x.nrows() >= min_leaf);
        let tree = fit_tree(x.view(), y.view(), &cfg).unwrap();
        prop_assert_eq!(first_split(&tree), common::brute_force_split(&x, &y, min_leaf));
    }

    #[test]
    fn fitted_trees_respect_size_controls(
        seed in 0u64..1000,
        n in 5usize..80,
        min_leaf in 1usize..6,
        min_parent in 1usize..20,
        max_splits in prop::option::of(0usize..30),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(0..8) as f64);
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-5.0..5.0));
        let cfg = TreeConfig { min_leaf_size: min_leaf, min_parent_size: min_parent, max_splits, seed };
        prop_assume!(n >= min_leaf);
        let tree = fit_tree(x.view(), y.view(), &cfg).unwrap();
        let budget = max_splits.unwrap_or(n - 1);
        prop_assert_eq!(common::tree_violation(&tree, min_leaf, min_parent, budget), None);
    }

    #[test]
    fn distinct_rows_are_fitted_exactly(seed in 0u64..1000, n in 2usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let cfg = TreeConfig { min_leaf_size: 1, min_parent_size: 2, ..Default::default() };
        let tree = fit_tree(x.view(), y.view(), &cfg).unwrap();
        let p = predict_tree(&tree, x.view()).unwrap();
        let m = compute_metrics(y.as_slice().unwrap(), &p, DenominatorMode::ActualRange).unwrap();
        prop_assert_eq!(m.r2, MetricValue::Defined(1.0));
    }
}

fn regression_problem(seed: u64, n: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::<f64>::from_shape_fn((n, 4), |_| rng.random_range(-3.0..3.0));
    let y = Array1::from_shape_fn(n, |i| (x[[i, 0]] * 2.0).sin() * 4.0 + x[[i, 2]].abs());
    (x, y)
}

#[test]
fn unbagged_forest_is_its_single_tree() {
    let (x, y) = regression_problem(8, 120);
    let tree_cfg = TreeConfig { min_leaf_size: 2, ..Default::default() };
    let forest = fit_forest(
        x.view(),
        y.view(),
        &ForestConfig { n_trees: 9, tree: tree_cfg.clone(), bootstrap: false, mtry: None, seed: 77 },
    )
    .unwrap();
    let tree = fit_tree(x.view(), y.view(), &tree_cfg).unwrap();
    let a = predict_forest(&forest, x.view()).unwrap();
    let b = predict_tree(&tree, x.view()).unwrap();
    assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn forest_prediction_is_mean_of_members() {
    let (x, y) = regression_problem(9, 150);
    let forest = fit_forest(x.view(), y.view(), &ForestConfig { n_trees: 25, mtry: Some(2), seed: 5, ..Default::default() }).unwrap();
    let got = predict_forest(&forest, x.view()).unwrap();
    let members: Vec<Vec<f64>> = forest.trees.iter().map(|t| predict_tree(t, x.view()).unwrap()).collect();
    for (i, g) in got.iter().enumerate() {
        let mean = members.iter().map(|m| m[i]).sum::<f64>() / members.len() as f64;
        assert!((g - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    }
}

#[test]
fn forest_bytes_do_not_depend_on_thread_count() {
    let (x, y) = regression_problem(10, 100);
    let cfg = ForestConfig { n_trees: 16, mtry: Some(3), seed: 21, ..Default::default() };
    let fit_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| Model::Forest(fit_forest(x.view(), y.view(), &cfg).unwrap()).to_json())
    };
    let one = fit_with(1);
    assert_eq!(one, fit_with(1));
    assert_eq!(one, fit_with(4));
}

#[test]
fn same_seed_forests_on_a_step_agree_where_leaves_agree() {
    let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64);
    let y = Array1::from_shape_fn(40, |i| if i < 20 { 0.0 } else { 10.0 });
    let cfg = ForestConfig { n_trees: 10, seed: 1, tree: TreeConfig { min_parent_size: 2, ..Default::default() }, ..Default::default() };
    let a = fit_forest(x.view(), y.view(), &cfg).unwrap();
    assert_eq!(a, fit_forest(x.view(), y.view(), &cfg).unwrap());
    let b = fit_forest(x.view(), y.view(), &ForestConfig { seed: 2, ..cfg }).unwrap();
    let probe = Array2::from_shape_fn((2, 1), |(i, _)| if i == 0 { 5.0 } else { 35.0 });
    assert_eq!(predict_forest(&a, probe.view()).unwrap(), predict_forest(&b, probe.view()).unwrap());
}
