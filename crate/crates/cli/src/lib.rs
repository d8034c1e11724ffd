//! Argument grammar and execution for the `emissionscope` binary.
//!
//! `--out` names a directory. Each verb writes fixed file names inside it:
//!
//! | verb      | files                                          |
//! |-----------|------------------------------------------------|
//! | synth     | `s1.csv`, `s2.csv`, `pems.csv`, `truth.json`   |
//! | dataset   | `dataset.csv`, `dataset.provenance.json`       |
//! | train     | `model.json`, `train.<fmt>`                    |
//! | sweep     | `sweep.<fmt>`, `sweep.sidecar.json`            |
//! | converge  | `convergence.<fmt>`                            |
//! | compare   | `comparison.<fmt>`                             |
//! | report    | `<input stem>.<fmt>`                           |

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use emissionscope::dataset::{Dataset, DatasetError};
use emissionscope::experiment::{
    emit_report, forest_convergence, forest_grid, published_forest_config, published_forest_size,
    published_mlp_grid, published_tree_grid, read_report, run_sweep, split_indices, sweep_sidecar,
    compare_best, ExperimentError, ReportDocument, ReportFormat, SplitSpec, SplitStrategy,
    SweepReport, SweepRow,
};
use emissionscope::ingest::{parse_inertial_csv, parse_pems_csv, GasId, IngestError};
use emissionscope::metrics::{compute_metrics, DenominatorMode, MetricError};
use emissionscope::models::{
    ForestConfig, MlpConfig, ModelError, ModelFamily, ModelSpec, TreeConfig,
};
use emissionscope::synth::{generate, SynthConfig, SynthError};
use emissionscope::windowing::{build_dataset, ChannelMask, LabelMode, LabelPolicy, WindowConfig, WindowError};

pub const THREADS_ENV: &str = "EMISSIONSCOPE_THREADS";

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "emissionscope", version, about = "Inertial-sensor emission regression pipeline")]
pub struct Command {
    #[command(subcommand)]
    pub verb: Verb,
    /// Seed for every random choice (synthesis, splits, model initialization).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Report format: csv or json.
    #[arg(long, global = true, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Verb {
    /// Generate synthetic sensor and analyzer streams with ground truth.
    Synth(SynthArgs),
    /// Window, featurize and label sensor files into a dataset CSV.
    Dataset(DatasetArgs),
    /// Fit one model on the train split and score it on the test split.
    Train(TrainArgs),
    /// Fit and score every configuration of a grid on one split.
    Sweep(SweepArgs),
    /// Score forests of increasing size and pick the converged size.
    Converge(ConvergeArgs),
    /// Build the best-per-family table from sweep reports.
    Compare(CompareArgs),
    /// Re-emit a JSON report in the requested format.
    Report(ReportArgs),
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SynthArgs {
    /// Seconds of operation.
    #[arg(long, default_value_t = 600.0)]
    pub duration: f64,
    /// Inertial sample rate in Hz.
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    /// Analyzer record rate in Hz.
    #[arg(long, default_value_t = 1.0)]
    pub pems_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct DatasetArgs {
    /// Inertial CSV files; the file stem becomes the sensor id.
    #[arg(long, required = true, num_args = 1..)]
    pub sensors: Vec<PathBuf>,
    /// Gas analyzer CSV.
    #[arg(long)]
    pub pems: PathBuf,
    /// Inertial sample rate in Hz.
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 25)]
    pub window_len: usize,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, default_value_t = LabelMode::Nearest)]
    pub label_mode: LabelMode,
    /// Largest allowed distance in seconds between a window and its label.
    #[arg(long, default_value_t = 2.0)]
    pub max_gap: f64,
    /// `all`, `accel`, `gyro`, or a comma list of feature names.
    #[arg(long, default_value = "all", value_parser = parse_channels)]
    pub channels: String,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SplitArgs {
    /// random or chronological.
    #[arg(long, default_value_t = SplitStrategy::Random)]
    pub split: SplitStrategy,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
}

impl SplitArgs {
    fn spec(&self, seed: u64) -> SplitSpec {
        SplitSpec { train_fraction: self.train_fraction, strategy: self.split, seed }
    }

    fn push_args(&self, out: &mut Vec<String>) {
        push(out, "--split", self.split);
        push(out, "--train-fraction", self.train_fraction);
    }
}

/// Network training options shared by `train` and `sweep`.
#[derive(Debug, Clone, PartialEq, Args)]
pub struct MlpArgs {
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    /// Feed features to the network without min-max scaling.
    #[arg(long)]
    pub raw_inputs: bool,
}

impl MlpArgs {
    fn config(&self, hidden_layers: Vec<usize>, seed: u64) -> MlpConfig {
        MlpConfig {
            hidden_layers,
            learning_rate: self.lr,
            epochs: self.epochs,
            seed,
            normalize_inputs: !self.raw_inputs,
        }
    }

    fn push_args(&self, out: &mut Vec<String>) {
        push(out, "--lr", self.lr);
        push(out, "--epochs", self.epochs);
        if self.raw_inputs {
            out.push("--raw-inputs".into());
        }
    }
}

/// Forest options shared by `train`, `sweep` and `converge`.
#[derive(Debug, Clone, PartialEq, Args)]
pub struct ForestArgs {
    /// Features tried per split; all of them when absent.
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Grow every tree on the full training set.
    #[arg(long)]
    pub no_bootstrap: bool,
}

impl ForestArgs {
    fn push_args(&self, out: &mut Vec<String>) {
        if let Some(m) = self.mtry {
            push(out, "--mtry", m);
        }
        if self.no_bootstrap {
            out.push("--no-bootstrap".into());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct TrainArgs {
    /// Dataset CSV written by `dataset`.
    #[arg(long, default_value = "dataset.csv")]
    pub data: PathBuf,
    #[arg(long, default_value_t = GasId::Co)]
    pub gas: GasId,
    #[arg(long)]
    pub family: ModelFamily,
    /// Hidden layer widths, e.g. `100,90,80`.
    #[arg(long, default_value = "100,90,80", value_parser = parse_layers)]
    pub hidden: Layers,
    #[command(flatten)]
    pub mlp: MlpArgs,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    #[arg(long, default_value_t = 10)]
    pub min_parent: usize,
    #[arg(long)]
    pub max_splits: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

impl TrainArgs {
    pub fn spec(&self, seed: u64) -> ModelSpec {
        let tree = TreeConfig {
            max_splits: self.max_splits,
            min_leaf_size: self.min_leaf,
            min_parent_size: self.min_parent,
            seed,
        };
        match self.family {
            ModelFamily::Lr => ModelSpec::Lr,
            ModelFamily::Mlp => ModelSpec::Mlp(self.mlp.config(self.hidden.0.clone(), seed)),
            ModelFamily::Dtr => ModelSpec::Dtr(tree),
            ModelFamily::Rf => ModelSpec::Rf(ForestConfig {
                n_trees: self.trees,
                tree,
                bootstrap: !self.forest.no_bootstrap,
                mtry: self.forest.mtry,
                seed,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "dataset.csv")]
    pub data: PathBuf,
    #[arg(long, default_value_t = GasId::Co)]
    pub gas: GasId,
    #[arg(long)]
    pub family: ModelFamily,
    /// One network architecture per occurrence, e.g. `--arch 40,30 --arch 20`.
    /// Defaults to the four published architectures.
    #[arg(long = "arch", value_parser = parse_layers)]
    pub archs: Vec<Layers>,
    #[command(flatten)]
    pub mlp: MlpArgs,
    /// Minimum leaf sizes; trees sweep the product with `--min-parent`.
    #[arg(long, value_delimiter = ',')]
    pub min_leaf: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub min_parent: Vec<usize>,
    #[arg(long)]
    pub max_splits: Option<usize>,
    /// Forest sizes. Defaults to the published size for the gas.
    #[arg(long, value_delimiter = ',')]
    pub trees: Vec<usize>,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

impl SweepArgs {
    /// The configurations this sweep evaluates, in row order.
    pub fn grid(&self, seed: u64) -> Result<Vec<ModelSpec>, CliError> {
        let tree = TreeConfig { max_splits: self.max_splits, seed, ..TreeConfig::default() };
        let grid = match self.family {
            ModelFamily::Lr => vec![ModelSpec::Lr],
            ModelFamily::Mlp if self.archs.is_empty() => published_mlp_grid(&self.mlp.config(Vec::new(), seed)),
            ModelFamily::Mlp => self
                .archs
                .iter()
                .map(|a| ModelSpec::Mlp(self.mlp.config(a.0.clone(), seed)))
                .collect(),
            ModelFamily::Dtr if self.min_leaf.is_empty() && self.min_parent.is_empty() => published_tree_grid(&tree),
            ModelFamily::Dtr => {
                let leaves = or_default(&self.min_leaf, tree.min_leaf_size);
                let parents = or_default(&self.min_parent, tree.min_parent_size);
                leaves
                    .iter()
                    .flat_map(|&l| {
                        let tree = &tree;
                        parents.iter().map(move |&p| {
                            ModelSpec::Dtr(TreeConfig { min_leaf_size: l, min_parent_size: p, ..tree.clone() })
                        })
                    })
                    .collect()
            }
            ModelFamily::Rf => {
                if self.min_leaf.len() > 1 || self.min_parent.len() > 1 {
                    return Err(CliError::Usage(
                        "--min-leaf and --min-parent take a single value for rf sweeps".into(),
                    ));
                }
                let mut base = published_forest_config(self.gas, seed).unwrap_or(ForestConfig { seed, ..Default::default() });
                base.tree.max_splits = self.max_splits;
                base.tree.seed = seed;
                if let Some(&l) = self.min_leaf.first() {
                    base.tree.min_leaf_size = l;
                }
                if let Some(&p) = self.min_parent.first() {
                    base.tree.min_parent_size = p;
                }
                base.bootstrap = !self.forest.no_bootstrap;
                base.mtry = self.forest.mtry;
                let counts = if self.trees.is_empty() {
                    vec![published_forest_size(self.gas).unwrap_or(base.n_trees)]
                } else {
                    self.trees.clone()
                };
                forest_grid(&counts, &base)
            }
        };
        Ok(grid)
    }
}

fn or_default(values: &[usize], default: usize) -> Vec<usize> {
    if values.is_empty() {
        vec![default]
    } else {
        values.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ConvergeArgs {
    #[arg(long, default_value = "dataset.csv")]
    pub data: PathBuf,
    #[arg(long, default_value_t = GasId::Co)]
    pub gas: GasId,
    /// Increasing forest sizes to score.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "10,20,30,40,50,60,70,80,90,100,110,120,130,140,150,160,170,180,190,200"
    )]
    pub trees: Vec<usize>,
    /// Largest R² gap to the biggest forest that still counts as converged.
    #[arg(long, default_value_t = 0.005)]
    pub tolerance: f64,
    /// Defaults to the leaf size of the gas's published best tree.
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub min_parent: usize,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct CompareArgs {
    /// Sweep reports in JSON.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReportArgs {
    /// A JSON report written by sweep, converge or compare.
    #[arg(long = "in")]
    pub input: PathBuf,
}

/// Hidden layer widths written as a comma list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layers(pub Vec<usize>);

impl fmt::Display for Layers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Layers {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let widths = s
            .split(',')
            .map(|w| w.trim().parse::<usize>().map_err(|_| format!("`{w}` is not a layer width")))
            .collect::<Result<Vec<_>, _>>()?;
        if widths.contains(&0) {
            return Err("layer widths must be positive".into());
        }
        Ok(Layers(widths))
    }
}

fn parse_layers(s: &str) -> Result<Layers, String> {
    s.parse()
}

fn parse_channels(s: &str) -> Result<String, String> {
    ChannelMask::from_str(s).map(|_| s.to_string())
}

fn push(out: &mut Vec<String>, flag: &str, value: impl fmt::Display) {
    out.push(flag.to_string());
    out.push(value.to_string());
}

fn push_path(out: &mut Vec<String>, flag: &str, path: &Path) {
    push(out, flag, path.display());
}

fn push_list<T: fmt::Display>(out: &mut Vec<String>, flag: &str, values: &[T]) {
    if !values.is_empty() {
        let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        push(out, flag, parts.join(","));
    }
}

impl Command {
    /// Canonical argument list: verb, every verb option in declaration
    /// order, then the global flags. Parsing it yields `self` again.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = Vec::new();
        match &self.verb {
            Verb::Synth(s) => {
                a.push("synth".into());
                push(&mut a, "--duration", s.duration);
                push(&mut a, "--rate", s.rate);
                push(&mut a, "--pems-rate", s.pems_rate);
                push(&mut a, "--noise", s.noise);
            }
            Verb::Dataset(d) => {
                a.push("dataset".into());
                a.push("--sensors".into());
                a.extend(d.sensors.iter().map(|p| p.display().to_string()));
                push_path(&mut a, "--pems", &d.pems);
                push(&mut a, "--rate", d.rate);
                push(&mut a, "--window-len", d.window_len);
                push(&mut a, "--overlap", d.overlap);
                push(&mut a, "--label-mode", d.label_mode);
                push(&mut a, "--max-gap", d.max_gap);
                push(&mut a, "--channels", &d.channels);
            }
            Verb::Train(t) => {
                a.push("train".into());
                push_path(&mut a, "--data", &t.data);
                push(&mut a, "--gas", t.gas);
                push(&mut a, "--family", t.family);
                push(&mut a, "--hidden", &t.hidden);
                t.mlp.push_args(&mut a);
                push(&mut a, "--min-leaf", t.min_leaf);
                push(&mut a, "--min-parent", t.min_parent);
                if let Some(m) = t.max_splits {
                    push(&mut a, "--max-splits", m);
                }
                push(&mut a, "--trees", t.trees);
                t.forest.push_args(&mut a);
                t.split.push_args(&mut a);
            }
            Verb::Sweep(s) => {
                a.push("sweep".into());
                push_path(&mut a, "--data", &s.data);
                push(&mut a, "--gas", s.gas);
                push(&mut a, "--family", s.family);
                for arch in &s.archs {
                    push(&mut a, "--arch", arch);
                }
                s.mlp.push_args(&mut a);
                push_list(&mut a, "--min-leaf", &s.min_leaf);
                push_list(&mut a, "--min-parent", &s.min_parent);
                if let Some(m) = s.max_splits {
                    push(&mut a, "--max-splits", m);
                }
                push_list(&mut a, "--trees", &s.trees);
                s.forest.push_args(&mut a);
                s.split.push_args(&mut a);
            }
            Verb::Converge(c) => {
                a.push("converge".into());
                push_path(&mut a, "--data", &c.data);
                push(&mut a, "--gas", c.gas);
                push_list(&mut a, "--trees", &c.trees);
                push(&mut a, "--tolerance", c.tolerance);
                if let Some(l) = c.min_leaf {
                    push(&mut a, "--min-leaf", l);
                }
                push(&mut a, "--min-parent", c.min_parent);
                c.forest.push_args(&mut a);
                c.split.push_args(&mut a);
            }
            Verb::Compare(c) => {
                a.push("compare".into());
                a.push("--in".into());
                a.extend(c.inputs.iter().map(|p| p.display().to_string()));
            }
            Verb::Report(r) => {
                a.push("report".into());
                push_path(&mut a, "--in", &r.input);
            }
        }
        push(&mut a, "--seed", self.seed);
        push_path(&mut a, "--out", &self.out);
        push(&mut a, "--format", self.format);
        a
    }
}

/// Parses arguments that exclude the program name.
pub fn parse_args<I, T>(argv: I) -> Result<Command, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Command::try_parse_from(std::iter::once(OsString::from("emissionscope")).chain(argv.into_iter().map(Into::into)))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("UsageError: {0}")]
    Usage(String),
    #[error("Io: {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    /// A module error raised while reading `path`.
    #[error("{source} (in {})", path.display())]
    InFile { path: PathBuf, source: Box<CliError> },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Io { .. } => "Io",
            CliError::InFile { source, .. } => source.name(),
            CliError::Ingest(e) => e.name(),
            CliError::Window(e) => e.name(),
            CliError::Dataset(e) => e.name(),
            CliError::Model(e) => e.name(),
            CliError::Metric(e) => e.name(),
            CliError::Experiment(e) => e.name(),
            CliError::Synth(e) => e.name(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn in_file(path: &Path) -> impl FnOnce(CliError) -> CliError + '_ {
        move |e| match e {
            io @ CliError::Io { .. } => io,
            other => CliError::InFile { path: path.to_path_buf(), source: Box::new(other) },
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| io_error(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let bytes = read_bytes(path)?;
    Dataset::read_csv(bytes.as_slice(), None).map_err(|e| CliError::in_file(path)(e.into()))
}

fn load_report(path: &Path) -> Result<ReportDocument, CliError> {
    read_report(&read_text(path)?).map_err(|e| CliError::in_file(path)(e.into()))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

/// Output files of one verb, built fully in memory before anything is written.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn write(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let path = self.dir.join(name);
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn json_line(value: &impl serde::Serialize) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text.into_bytes()
}

fn sensor_id(path: &Path) -> Result<String, CliError> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Usage(format!("cannot derive a sensor id from {}", path.display())))
}

/// Runs a parsed command; returns the files it wrote.
pub fn execute(cmd: &Command) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Outputs::new(&cmd.out);
    let fmt = cmd.format;
    match &cmd.verb {
        Verb::Synth(s) => {
            let cfg = SynthConfig {
                duration_s: s.duration,
                rate_hz: s.rate,
                pems_rate_hz: s.pems_rate,
                noise_std: s.noise,
                seed: cmd.seed,
                ..SynthConfig::default()
            };
            let synth = generate(&cfg)?;
            for series in &synth.sensors {
                let mut buf = Vec::new();
                series.write_csv(&mut buf).map_err(|e| io_error(&cmd.out, e))?;
                out.add(format!("{}.csv", series.sensor_id()), buf);
            }
            let mut buf = Vec::new();
            synth.emissions.write_csv(&mut buf)?;
            out.add("pems.csv", buf);
            out.add("truth.json", json_line(&synth.truth));
        }
        Verb::Dataset(d) => {
            let mut sensors = Vec::new();
            for path in &d.sensors {
                let id = sensor_id(path)?;
                let bytes = read_bytes(path)?;
                let series =
                    parse_inertial_csv(bytes.as_slice(), &id, d.rate).map_err(|e| CliError::in_file(path)(e.into()))?;
                sensors.push(series);
            }
            let bytes = read_bytes(&d.pems)?;
            let emissions = parse_pems_csv(bytes.as_slice()).map_err(|e| CliError::in_file(&d.pems)(e.into()))?;
            let window = WindowConfig { window_len: d.window_len, overlap_fraction: d.overlap };
            let policy = LabelPolicy { mode: d.label_mode, max_gap_s: d.max_gap };
            let mask = ChannelMask::from_str(&d.channels).map_err(CliError::Usage)?;
            let ds = build_dataset(&sensors, &emissions, &window, &policy, &mask)?;
            let mut buf = Vec::new();
            ds.write_csv(&mut buf)?;
            out.add("dataset.csv", buf);
            let mut sidecar = ds.sidecar_json();
            sidecar.push('\n');
            out.add("dataset.provenance.json", sidecar);
        }
        Verb::Train(t) => {
            let ds = load_dataset(&t.data)?;
            let spec = t.spec(cmd.seed);
            let split_spec = t.split.spec(cmd.seed);
            let split = split_indices(ds.window_center_t(), &split_spec)?;
            let (train, test) = (ds.select_rows(&split.train), ds.select_rows(&split.test));
            let model = spec.fit(train.x(), train.target(t.gas)?)?;
            let predicted = model.predict(test.x())?;
            let actual = test.target(t.gas)?.to_vec();
            let metrics = compute_metrics(&actual, &predicted, DenominatorMode::default())?;
            let report = SweepReport {
                gas: t.gas,
                family: t.family,
                split: split_spec,
                dataset_fingerprint: ds.fingerprint(),
                partition_digest: split.digest(),
                n_train: split.train.len(),
                n_test: split.test.len(),
                rows: vec![SweepRow { config: spec.descriptor(), spec, metrics: Some(metrics), error: None }],
                runtimes_s: Vec::new(),
            };
            let mut model_json = model.to_json();
            model_json.push('\n');
            out.add("model.json", model_json);
            out.add(format!("train.{fmt}"), emit_report(&ReportDocument::Sweep(report), fmt));
        }
        Verb::Sweep(s) => {
            let grid = s.grid(cmd.seed)?;
            let ds = load_dataset(&s.data)?;
            let report = run_sweep(&ds, s.gas, s.family, &grid, &s.split.spec(cmd.seed))?;
            let mut sidecar = sweep_sidecar(&report);
            sidecar.push('\n');
            out.add(format!("sweep.{fmt}"), emit_report(&ReportDocument::Sweep(report), fmt));
            out.add("sweep.sidecar.json", sidecar);
        }
        Verb::Converge(c) => {
            let ds = load_dataset(&c.data)?;
            let mut base = published_forest_config(c.gas, cmd.seed).unwrap_or(ForestConfig { seed: cmd.seed, ..Default::default() });
            base.tree.seed = cmd.seed;
            base.tree.min_parent_size = c.min_parent;
            if let Some(l) = c.min_leaf {
                base.tree.min_leaf_size = l;
            }
            base.bootstrap = !c.forest.no_bootstrap;
            base.mtry = c.forest.mtry;
            let curve = forest_convergence(&ds, c.gas, &c.trees, &base, &c.split.spec(cmd.seed), c.tolerance)?;
            out.add(format!("convergence.{fmt}"), emit_report(&ReportDocument::Convergence(curve), fmt));
        }
        Verb::Compare(c) => {
            let mut reports = Vec::new();
            for path in &c.inputs {
                match load_report(path)? {
                    ReportDocument::Sweep(r) => reports.push(r),
                    _ => {
                        return Err(CliError::InFile {
                            path: path.clone(),
                            source: Box::new(ExperimentError::InvalidConfig("not a sweep report".into()).into()),
                        })
                    }
                }
            }
            let table = compare_best(&reports)?;
            out.add(format!("comparison.{fmt}"), emit_report(&ReportDocument::Comparison(table), fmt));
        }
        Verb::Report(r) => {
            let doc = load_report(&r.input)?;
            let stem = r.input.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            out.add(format!("{stem}.{fmt}"), emit_report(&doc, fmt));
        }
    }
    out.write()
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    // A pool may already exist when `run` is called more than once in a process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Full program: parse, execute, report. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = match parse_args(argv) {
        Ok(cmd) => cmd,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match configure_threads().and_then(|()| execute(&cmd)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("emissionscope: error: {e}");
            e.exit_code()
        }
    }
}
