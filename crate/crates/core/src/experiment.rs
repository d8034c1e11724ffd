//! Train/test splitting, hyperparameter sweeps, forest-size convergence,
//! best-model comparison, and deterministic report serialization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::ingest::GasId;
use crate::metrics::{compute_metrics, DenominatorMode, MetricReport, MetricValue};
use crate::models::{
    fit_forest, predict_forest, ForestConfig, MlpConfig, ModelFamily, ModelSpec, TreeConfig,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("TooFewRows: {0} rows, need at least 2")]
    TooFewRows(usize),
    #[error("MissingChannel: dataset has no target for {0}")]
    MissingChannel(GasId),
    #[error("EmptyGrid: a sweep needs at least one configuration")]
    EmptyGrid,
    #[error("EmptyInput: no reports to compare")]
    EmptyInput,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("Serialization: {0}")]
    Serialization(String),
}

impl ExperimentError {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentError::TooFewRows(_) => "TooFewRows",
            ExperimentError::MissingChannel(_) => "MissingChannel",
            ExperimentError::EmptyGrid => "EmptyGrid",
            ExperimentError::EmptyInput => "EmptyInput",
            ExperimentError::InvalidConfig(_) => "InvalidConfig",
            ExperimentError::Serialization(_) => "Serialization",
        }
    }
}

fn target_of(ds: &Dataset, gas: GasId) -> Result<Vec<f64>, ExperimentError> {
    match ds.target(gas) {
        Ok(v) => Ok(v.to_vec()),
        Err(DatasetError::MissingChannel(g)) => Err(ExperimentError::MissingChannel(g)),
        Err(e) => Err(ExperimentError::InvalidConfig(e.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitStrategy {
    Random,
    Chronological,
}

impl fmt::Display for SplitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitStrategy::Random => "random",
            SplitStrategy::Chronological => "chronological",
        })
    }
}

impl FromStr for SplitStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(SplitStrategy::Random),
            "chronological" | "chrono" => Ok(SplitStrategy::Chronological),
            other => Err(format!("unknown split strategy `{other}` (expected random or chronological)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub strategy: SplitStrategy,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.7, strategy: SplitStrategy::Random, seed: 0 }
    }
}

/// Row indices of a train/test partition, each side ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Hex digest identifying the partition.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for side in [&self.train, &self.test] {
            h.update((side.len() as u64).to_le_bytes());
            for &i in side {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Partitions `window_center_t.len()` rows. The train side gets
/// `round(train_fraction · n)` rows, clamped so both sides are non-empty.
pub fn split_indices(window_center_t: &[f64], spec: &SplitSpec) -> Result<Split, ExperimentError> {
    let n = window_center_t.len();
    if n < 2 {
        return Err(ExperimentError::TooFewRows(n));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(ExperimentError::InvalidConfig(format!(
            "train_fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    match spec.strategy {
        SplitStrategy::Random => order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed)),
        SplitStrategy::Chronological => {
            order.sort_by(|&a, &b| window_center_t[a].total_cmp(&window_center_t[b]))
        }
    }
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), ExperimentError> {
    let split = split_indices(ds.window_center_t(), spec)?;
    Ok((ds.select_rows(&split.train), ds.select_rows(&split.test)))
}

/// One evaluated configuration. Exactly one of `metrics` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: String,
    pub spec: ModelSpec,
    pub metrics: Option<MetricReport>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn r2(&self) -> MetricValue {
        self.metrics.map_or(MetricValue::Undefined, |m| m.r2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub gas: GasId,
    pub family: ModelFamily,
    pub split: SplitSpec,
    pub dataset_fingerprint: String,
    pub partition_digest: String,
    pub n_train: usize,
    pub n_test: usize,
    pub rows: Vec<SweepRow>,
    /// Wall-clock fit+evaluate seconds per row; kept out of the report so
    /// emitted bytes stay reproducible, and written only to the sidecar.
    #[serde(skip)]
    pub runtimes_s: Vec<f64>,
}

/// Features and one target, materialized for fitting.
struct Problem {
    x: ndarray::Array2<f64>,
    y: ndarray::Array1<f64>,
}

fn problem(ds: &Dataset, rows: &[usize], gas: GasId) -> Result<Problem, ExperimentError> {
    let sub = ds.select_rows(rows);
    let y = ndarray::Array1::from(target_of(&sub, gas)?);
    Ok(Problem { x: sub.x().to_owned(), y })
}

fn evaluate(spec: &ModelSpec, train: &Problem, test: &Problem) -> Result<MetricReport, String> {
    let model = spec.fit(train.x.view(), train.y.view()).map_err(|e| e.to_string())?;
    let predicted = model.predict(test.x.view()).map_err(|e| e.to_string())?;
    compute_metrics(test.y.as_slice().expect("contiguous"), &predicted, DenominatorMode::default())
        .map_err(|e| e.to_string())
}

/// Fits and scores every grid entry on one shared split. Rows follow grid
/// order; a failed fit becomes a row carrying its error message.
pub fn run_sweep(
    ds: &Dataset,
    gas: GasId,
    family: ModelFamily,
    grid: &[ModelSpec],
    spec: &SplitSpec,
) -> Result<SweepReport, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    if let Some(other) = grid.iter().find(|s| s.family() != family) {
        return Err(ExperimentError::InvalidConfig(format!(
            "grid entry {} belongs to family {}, not {family}",
            other.descriptor(),
            other.family()
        )));
    }
    target_of(ds, gas)?;
    let split = split_indices(ds.window_center_t(), spec)?;
    let train = problem(ds, &split.train, gas)?;
    let test = problem(ds, &split.test, gas)?;

    let outcomes: Vec<(SweepRow, f64)> = grid
        .par_iter()
        .map(|s| {
            let started = Instant::now();
            let result = evaluate(s, &train, &test);
            let row = SweepRow {
                config: s.descriptor(),
                spec: s.clone(),
                metrics: result.as_ref().ok().copied(),
                error: result.err(),
            };
            (row, started.elapsed().as_secs_f64())
        })
        .collect();
    let (rows, runtimes_s) = outcomes.into_iter().unzip();
    Ok(SweepReport {
        gas,
        family,
        split: *spec,
        dataset_fingerprint: ds.fingerprint(),
        partition_digest: split.digest(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        rows,
        runtimes_s,
    })
}

/// JSON sidecar for a sweep: reproducibility context plus per-row runtimes.
pub fn sweep_sidecar(report: &SweepReport) -> String {
    let mut leakage = String::new();
    if report.split.strategy == SplitStrategy::Random {
        leakage.push_str(
            "random split of overlapping windows: adjacent windows share samples, \
             so test scores can be optimistic; use the chronological strategy for a held-out period",
        );
    }
    let rows: Vec<Value> = report
        .rows
        .iter()
        .zip(&report.runtimes_s)
        .map(|(r, t)| serde_json::json!({ "config": r.config, "runtime_s": t }))
        .collect();
    let doc = serde_json::json!({
        "library_version": env!("CARGO_PKG_VERSION"),
        "dataset_fingerprint": report.dataset_fingerprint,
        "partition_digest": report.partition_digest,
        "split": report.split,
        "caveat": leakage,
        "rows": rows,
    });
    serde_json::to_string_pretty(&doc).expect("sidecar serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n_trees: usize,
    pub r2: MetricValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub gas: GasId,
    pub points: Vec<ConvergencePoint>,
    pub selected_n_trees: usize,
    pub tolerance: f64,
    pub split: SplitSpec,
    pub dataset_fingerprint: String,
}

/// Smallest count whose R² lies within `tolerance` of the final count's R².
/// With an undefined final R², the final count is selected.
pub fn select_converged(points: &[ConvergencePoint], tolerance: f64) -> usize {
    let last = points.last().expect("non-empty curve");
    let Some(reference) = last.r2.value() else {
        return last.n_trees;
    };
    points
        .iter()
        .find(|p| p.r2.value().is_some_and(|r| (r - reference).abs() <= tolerance))
        .map_or(last.n_trees, |p| p.n_trees)
}

/// Test R² as a function of forest size. The largest forest is fitted once;
/// since member `i` depends only on `(seed, i)`, its first `k` trees are the
/// forest that `n_trees = k` would produce.
pub fn forest_convergence(
    ds: &Dataset,
    gas: GasId,
    tree_counts: &[usize],
    base: &ForestConfig,
    spec: &SplitSpec,
    tolerance: f64,
) -> Result<ConvergenceCurve, ExperimentError> {
    if tree_counts.is_empty() || tree_counts[0] == 0 || tree_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::InvalidConfig(
            "tree counts must be positive and strictly increasing".into(),
        ));
    }
    if !(tolerance >= 0.0) {
        return Err(ExperimentError::InvalidConfig(format!("tolerance must be non-negative, got {tolerance}")));
    }
    target_of(ds, gas)?;
    let split = split_indices(ds.window_center_t(), spec)?;
    let train = problem(ds, &split.train, gas)?;
    let test = problem(ds, &split.test, gas)?;
    let max = *tree_counts.last().expect("non-empty");
    let cfg = ForestConfig { n_trees: max, ..base.clone() };
    let forest = fit_forest(train.x.view(), train.y.view(), &cfg)
        .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let actual = test.y.as_slice().expect("contiguous");

    let points = tree_counts
        .par_iter()
        .map(|&k| {
            let predicted = predict_forest(&forest.prefix(k), test.x.view())
                .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
            let r2 = compute_metrics(actual, &predicted, DenominatorMode::default())
                .map_or(MetricValue::Undefined, |m| m.r2);
            Ok(ConvergencePoint { n_trees: k, r2 })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(ConvergenceCurve {
        gas,
        selected_n_trees: select_converged(&points, tolerance),
        points,
        tolerance,
        split: *spec,
        dataset_fingerprint: ds.fingerprint(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub gas: GasId,
    pub family: ModelFamily,
    /// Descriptor of the winning configuration; absent when no row succeeded.
    pub config: Option<String>,
    pub r2: MetricValue,
}

/// Best R² per gas (rows) and model family (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub gases: Vec<GasId>,
    pub families: Vec<ModelFamily>,
    /// Row-major over `gases` × `families`.
    pub cells: Vec<ComparisonCell>,
}

impl ComparisonTable {
    pub fn cell(&self, gas: GasId, family: ModelFamily) -> Option<&ComparisonCell> {
        self.cells.iter().find(|c| c.gas == gas && c.family == family)
    }
}

pub fn compare_best(reports: &[SweepReport]) -> Result<ComparisonTable, ExperimentError> {
    if reports.is_empty() {
        return Err(ExperimentError::EmptyInput);
    }
    let mut rows: BTreeMap<(GasId, ModelFamily), Vec<&SweepRow>> = BTreeMap::new();
    for r in reports {
        rows.entry((r.gas, r.family)).or_default().extend(&r.rows);
    }
    let mut gases: Vec<GasId> = rows.keys().map(|k| k.0).collect();
    gases.dedup();
    let mut families: Vec<ModelFamily> = rows.keys().map(|k| k.1).collect();
    families.sort();
    families.dedup();

    let mut cells = Vec::with_capacity(gases.len() * families.len());
    for &gas in &gases {
        for &family in &families {
            let mut best: Option<(&SweepRow, f64)> = None;
            for row in rows.get(&(gas, family)).into_iter().flatten() {
                if let Some(r2) = row.r2().value() {
                    if best.is_none_or(|(_, b)| r2 > b) {
                        best = Some((row, r2));
                    }
                }
            }
            cells.push(ComparisonCell {
                gas,
                family,
                config: best.map(|(row, _)| row.config.clone()),
                r2: best.map_or(MetricValue::Undefined, |(_, r2)| MetricValue::Defined(r2)),
            });
        }
    }
    Ok(ComparisonTable { gases, families, cells })
}

/// Any emitted report, tagged so a file can be re-read without knowing its kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "report", rename_all = "lowercase")]
pub enum ReportDocument {
    Sweep(SweepReport),
    Comparison(ComparisonTable),
    Convergence(ConvergenceCurve),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Rounds to 6 significant digits.
pub fn round_sig6(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.5e}").parse().expect("formatted float parses")
}

fn fmt_num(v: f64) -> String {
    round_sig6(v).to_string()
}

fn fmt_metric(v: MetricValue) -> String {
    v.value().map_or_else(|| "undefined".to_string(), fmt_num)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig6(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("config,r2,rmse,mae,nrmse_pct\n");
    for row in &report.rows {
        let cells = match &row.metrics {
            Some(m) => [fmt_metric(m.r2), fmt_num(m.rmse), fmt_num(m.mae), fmt_metric(m.nrmse_pct)],
            None => std::array::from_fn(|_| "undefined".to_string()),
        };
        out.push_str(&format!("{},{}\n", row.config, cells.join(",")));
    }
    out
}

fn comparison_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("gas");
    for f in &table.families {
        out.push(',');
        out.push_str(f.as_str());
    }
    out.push('\n');
    for &gas in &table.gases {
        out.push_str(gas.as_str());
        for &family in &table.families {
            out.push(',');
            out.push_str(&table.cell(gas, family).map_or("undefined".into(), |c| fmt_metric(c.r2)));
        }
        out.push('\n');
    }
    out
}

fn convergence_csv(curve: &ConvergenceCurve) -> String {
    let mut out = String::from("n_trees,r2\n");
    for p in &curve.points {
        out.push_str(&format!("{},{}\n", p.n_trees, fmt_metric(p.r2)));
    }
    out
}

/// Serializes a report. JSON has sorted keys and every float rounded to six
/// significant digits, so equal inputs always give equal bytes.
pub fn emit_report(doc: &ReportDocument, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Csv => match doc {
            ReportDocument::Sweep(r) => sweep_csv(r),
            ReportDocument::Comparison(t) => comparison_csv(t),
            ReportDocument::Convergence(c) => convergence_csv(c),
        }
        .into_bytes(),
        ReportFormat::Json => {
            let mut value = serde_json::to_value(doc).expect("report serializes");
            round_floats(&mut value);
            let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
            text.push('\n');
            text.into_bytes()
        }
    }
}

pub fn read_report(json: &str) -> Result<ReportDocument, ExperimentError> {
    serde_json::from_str(json).map_err(|e| ExperimentError::Serialization(e.to_string()))
}

/// The four network architectures of the published sweep.
pub const PUBLISHED_MLP_ARCHITECTURES: [&[usize]; 4] =
    [&[40, 30], &[40, 30, 20], &[100, 90, 80], &[200, 190, 180]];

/// (min leaf, min parent) pairs of the published tree sweep, in table order.
pub const PUBLISHED_TREE_GRID: [(usize, usize); 6] = [(1, 5), (1, 10), (2, 5), (2, 10), (3, 5), (3, 10)];

pub fn published_mlp_grid(base: &MlpConfig) -> Vec<ModelSpec> {
    PUBLISHED_MLP_ARCHITECTURES
        .iter()
        .map(|h| ModelSpec::Mlp(MlpConfig { hidden_layers: h.to_vec(), ..base.clone() }))
        .collect()
}

pub fn published_tree_grid(base: &TreeConfig) -> Vec<ModelSpec> {
    PUBLISHED_TREE_GRID
        .iter()
        .map(|&(leaf, parent)| {
            ModelSpec::Dtr(TreeConfig { min_leaf_size: leaf, min_parent_size: parent, ..base.clone() })
        })
        .collect()
}

pub fn forest_grid(counts: &[usize], base: &ForestConfig) -> Vec<ModelSpec> {
    counts
        .iter()
        .map(|&n| ModelSpec::Rf(ForestConfig { n_trees: n, ..base.clone() }))
        .collect()
}

/// Best published tree configuration per gas as (min leaf, min parent).
pub fn published_best_tree(gas: GasId) -> Option<(usize, usize)> {
    match gas {
        GasId::Co => Some((2, 10)),
        GasId::No | GasId::No2 | GasId::Nox => Some((1, 10)),
        GasId::Co2 => Some((2, 5)),
        _ => None,
    }
}

/// Published converged forest size per gas.
pub fn published_forest_size(gas: GasId) -> Option<usize> {
    match gas {
        GasId::Co => Some(150),
        GasId::No => Some(135),
        GasId::No2 => Some(200),
        GasId::Nox => Some(85),
        GasId::Co2 => Some(90),
        _ => None,
    }
}

/// Forest settings used for a gas in the published comparison: its tree
/// count, with leaf size carried over from that gas's best single tree.
pub fn published_forest_config(gas: GasId, seed: u64) -> Option<ForestConfig> {
    let (leaf, _) = published_best_tree(gas)?;
    Some(ForestConfig {
        n_trees: published_forest_size(gas)?,
        tree: TreeConfig { min_leaf_size: leaf, ..TreeConfig::default() },
        seed,
        ..ForestConfig::default()
    })
}
