mod common;

use emissionscope::dataset::Dataset;
use emissionscope::experiment::{forest_convergence, SplitSpec};
use emissionscope::ingest::{parse_inertial_csv, parse_pems_csv, GasId};
use emissionscope::metrics::{compute_metrics, DenominatorMode, MetricValue};
use emissionscope::models::{fit_tree, predict_tree, ForestConfig, TreeConfig};
use emissionscope::synth::{generate, SynthConfig, SynthOutput};
use emissionscope::windowing::{build_dataset, segment, ChannelMask, LabelPolicy, WindowConfig};

fn dataset_of(out: &SynthOutput) -> Dataset {
    build_dataset(&out.sensors, &out.emissions, &WindowConfig::default(), &LabelPolicy::default(), &ChannelMask::all())
        .unwrap()
}

fn csv_bytes(ds: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    buf
}

#[test]
fn synthetic_streams_survive_their_csv_files() {
    let out = generate(&SynthConfig { duration_s: 20.0, seed: 3, ..Default::default() }).unwrap();
    for s in &out.sensors {
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = parse_inertial_csv(buf.as_slice(), s.sensor_id(), s.rate_hz()).unwrap();
        assert_eq!(&back, s);
    }
    let mut buf = Vec::new();
    out.emissions.write_csv(&mut buf).unwrap();
    assert_eq!(parse_pems_csv(buf.as_slice()).unwrap(), out.emissions);
}

#[test]
fn ten_minutes_give_4998_windows_per_sensor() {
    let out = generate(&SynthConfig { seed: 7, ..Default::default() }).unwrap();
    for s in &out.sensors {
        assert_eq!(s.len(), 60_000);
        assert_eq!(segment(s, &WindowConfig::default()).unwrap().len(), 4998);
    }
    let ds = dataset_of(&out);
    let prov = ds.provenance().unwrap();
    assert_eq!(prov.windows_total, 4998);
    assert_eq!(ds.n_rows() + prov.dropped, 4998);
    assert_eq!(ds.n_features(), 14);
    assert_eq!(out.truth.windows.len(), 4998);
}

#[test]
fn pipeline_is_byte_deterministic() {
    let cfg = SynthConfig { duration_s: 120.0, seed: 5, ..Default::default() };
    let a = dataset_of(&generate(&cfg).unwrap());
    let b = dataset_of(&generate(&cfg).unwrap());
    assert_eq!(csv_bytes(&a), csv_bytes(&b));
    assert_eq!(a.fingerprint(), b.fingerprint());
}

#[test]
fn noiseless_cycle_is_fitted_exactly_by_a_tree() {
    let out = generate(&SynthConfig { noise_std: 0.0, duration_s: 300.0, ..Default::default() }).unwrap();
    let ds = dataset_of(&out);
    let cfg = TreeConfig { min_leaf_size: 1, min_parent_size: 2, ..Default::default() };
    for gas in [GasId::Co, GasId::Nox, GasId::Co2] {
        let y = ds.target(gas).unwrap();
        let tree = fit_tree(ds.x(), y, &cfg).unwrap();
        let p = predict_tree(&tree, ds.x()).unwrap();
        let m = compute_metrics(y.as_slice().unwrap(), &p, DenominatorMode::default()).unwrap();
        assert_eq!(m.r2, MetricValue::Defined(1.0), "{gas}");
    }
}

#[test]
fn noiseless_labels_equal_the_ground_truth() {
    let out = generate(&SynthConfig { noise_std: 0.0, duration_s: 200.0, seed: 2, ..Default::default() }).unwrap();
    let ds = dataset_of(&out);
    let y = ds.target(GasId::Co).unwrap();
    for (c, label) in ds.window_center_t().iter().zip(y) {
        let nearest = out.truth.records.iter().min_by(|a, b| (a.t - c).abs().total_cmp(&(b.t - c).abs())).unwrap();
        assert_eq!(*label, nearest.emissions[&GasId::Co]);
    }
}

#[test]
fn more_noise_never_helps_the_oracle() {
    let mut scores = Vec::new();
    for noise_std in [0.05, 0.1, 0.2] {
        let out = generate(&SynthConfig { noise_std, seed: 9, duration_s: 300.0, ..Default::default() }).unwrap();
        let ds = dataset_of(&out);
        assert_eq!(ds.n_rows(), out.truth.windows.len());
        let truth: Vec<f64> = out.truth.windows.iter().map(|w| w.emissions[&GasId::Co]).collect();
        let labels = ds.target(GasId::Co).unwrap().to_vec();
        for (w, c) in out.truth.windows.iter().zip(ds.window_center_t()) {
            assert_eq!(w.t, *c);
        }
        scores.push(common::r2(&labels, &truth));
    }
    assert!(scores.windows(2).all(|w| w[1] <= w[0]), "{scores:?}");
}

#[test]
fn forest_convergence_plateaus() {
    let out = generate(&SynthConfig { seed: 4, duration_s: 300.0, ..Default::default() }).unwrap();
    let ds = dataset_of(&out);
    let counts: Vec<usize> = (1..=8).map(|k| k * 10).collect();
    let base = ForestConfig { seed: 4, ..Default::default() };
    let curve = forest_convergence(&ds, GasId::Co, &counts, &base, &SplitSpec::default(), 0.005).unwrap();
    let last = curve.points.last().unwrap().r2.value().unwrap();
    assert!(curve.selected_n_trees <= 80);
    for p in curve.points.iter().filter(|p| p.n_trees >= curve.selected_n_trees) {
        assert!((p.r2.value().unwrap() - last).abs() <= 0.005, "{:?}", curve.points);
    }
}
