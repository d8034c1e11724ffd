//! Sliding-window segmentation, per-window motion features, and label
//! alignment against the gas-analyzer stream.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetProvenance};
use crate::ingest::{derive_nox, EmissionSeries, GasId, IngestError, SensorSample, SensorSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("SeriesTooShort: {len} samples, window needs {window_len}")]
    SeriesTooShort { len: usize, window_len: usize },
    #[error("EmptyWindow")]
    EmptyWindow,
    #[error("MissingChannel: {0} not present in emission series")]
    MissingChannel(GasId),
    #[error("AllWindowsDropped: every one of {0} windows is farther than max_gap_s from a record")]
    AllWindowsDropped(usize),
    #[error("NoTemporalOverlap: {0}")]
    NoTemporalOverlap(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

impl WindowError {
    pub fn name(&self) -> &'static str {
        match self {
            WindowError::SeriesTooShort { .. } => "SeriesTooShort",
            WindowError::EmptyWindow => "EmptyWindow",
            WindowError::MissingChannel(_) => "MissingChannel",
            WindowError::AllWindowsDropped(_) => "AllWindowsDropped",
            WindowError::NoTemporalOverlap(_) => "NoTemporalOverlap",
            WindowError::InvalidConfig(_) => "InvalidConfig",
        }
    }
}

impl From<IngestError> for WindowError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::MissingChannel(g) => WindowError::MissingChannel(g),
            other => WindowError::InvalidConfig(other.to_string()),
        }
    }
}

/// Window length in samples and fractional overlap between consecutive windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_len: usize,
    pub overlap_fraction: f64,
}

impl Default for WindowConfig {
    /// 0.25 s at 100 Hz with 50% overlap.
    fn default() -> Self {
        WindowConfig { window_len: 25, overlap_fraction: 0.5 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), WindowError> {
        if self.window_len == 0 {
            return Err(WindowError::InvalidConfig("window_len must be at least 1".into()));
        }
        if !(self.overlap_fraction >= 0.0 && self.overlap_fraction < 1.0) {
            return Err(WindowError::InvalidConfig(format!(
                "overlap_fraction {} not in [0, 1)",
                self.overlap_fraction
            )));
        }
        Ok(())
    }

    /// Hop between window starts; 12 for the default 25-sample, 50% config.
    pub fn stride(&self) -> usize {
        let s = (self.window_len as f64 * (1.0 - self.overlap_fraction)).floor() as usize;
        s.clamp(1, self.window_len.max(1))
    }

    /// Number of windows produced from `n` samples.
    pub fn window_count(&self, n: usize) -> usize {
        if n < self.window_len {
            0
        } else {
            (n - self.window_len) / self.stride() + 1
        }
    }
}

/// Time extent of one window. `end_t` is one sample period past the last
/// sample, so a 25-sample window at 100 Hz starting at 0 spans [0, 0.25).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpan {
    pub start_t: f64,
    pub end_t: f64,
    pub center_t: f64,
}

impl WindowSpan {
    fn of(samples: &[SensorSample], period: f64) -> Self {
        let start_t = samples[0].t;
        let end_t = samples[samples.len() - 1].t + period;
        WindowSpan { start_t, end_t, center_t: 0.5 * (start_t + end_t) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    /// Index of the first sample in the segmented slice.
    pub start: usize,
    pub span: WindowSpan,
    samples: &'a [SensorSample],
}

impl<'a> Window<'a> {
    pub fn new(start: usize, span: WindowSpan, samples: &'a [SensorSample]) -> Self {
        Window { start, span, samples }
    }

    pub fn samples(&self) -> &'a [SensorSample] {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Cuts `series` into windows starting at 0, stride, 2·stride, ….
pub fn segment<'a>(series: &'a SensorSeries, cfg: &WindowConfig) -> Result<Vec<Window<'a>>, WindowError> {
    segment_samples(series.samples(), series.rate_hz(), cfg)
}

pub fn segment_samples<'a>(
    samples: &'a [SensorSample],
    rate_hz: f64,
    cfg: &WindowConfig,
) -> Result<Vec<Window<'a>>, WindowError> {
    cfg.validate()?;
    let n = samples.len();
    if n < cfg.window_len {
        return Err(WindowError::SeriesTooShort { len: n, window_len: cfg.window_len });
    }
    let period = 1.0 / rate_hz;
    let stride = cfg.stride();
    Ok((0..cfg.window_count(n))
        .map(|k| {
            let start = k * stride;
            let slice = &samples[start..start + cfg.window_len];
            Window::new(start, WindowSpan::of(slice, period), slice)
        })
        .collect())
}

/// The seven per-sensor window features, in extraction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    MeanGyroZ,
    MeanGyroX,
    MeanAccelX,
    MeanAccelY,
    MeanAccelZ,
    IqrAccelX,
    PeakAccelX,
}

pub const FEATURES_PER_SENSOR: usize = 7;

impl Feature {
    pub const ALL: [Feature; FEATURES_PER_SENSOR] = [
        Feature::MeanGyroZ,
        Feature::MeanGyroX,
        Feature::MeanAccelX,
        Feature::MeanAccelY,
        Feature::MeanAccelZ,
        Feature::IqrAccelX,
        Feature::PeakAccelX,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::MeanGyroZ => "mean_gyro_z",
            Feature::MeanGyroX => "mean_gyro_x",
            Feature::MeanAccelX => "mean_accel_x",
            Feature::MeanAccelY => "mean_accel_y",
            Feature::MeanAccelZ => "mean_accel_z",
            Feature::IqrAccelX => "iqr_accel_x",
            Feature::PeakAccelX => "peak_accel_x",
        }
    }

    fn index(self) -> usize {
        Feature::ALL.iter().position(|&f| f == self).expect("listed")
    }

    fn is_gyro(self) -> bool {
        matches!(self, Feature::MeanGyroZ | Feature::MeanGyroX)
    }
}

/// Feature subset taken from every selected sensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMask {
    pub features: Vec<Feature>,
}

impl Default for ChannelMask {
    fn default() -> Self {
        ChannelMask::all()
    }
}

impl ChannelMask {
    pub fn all() -> Self {
        ChannelMask { features: Feature::ALL.to_vec() }
    }

    /// Three accelerometer means plus IQR and peak.
    pub fn accel_only() -> Self {
        ChannelMask { features: Feature::ALL.into_iter().filter(|f| !f.is_gyro()).collect() }
    }

    pub fn gyro_only() -> Self {
        ChannelMask { features: Feature::ALL.into_iter().filter(|f| f.is_gyro()).collect() }
    }

    fn validate(&self) -> Result<(), WindowError> {
        if self.features.is_empty() {
            return Err(WindowError::InvalidConfig("channel mask selects no features".into()));
        }
        let mut sorted = self.features.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.features.len() {
            return Err(WindowError::InvalidConfig("channel mask repeats a feature".into()));
        }
        Ok(())
    }
}

impl FromStr for ChannelMask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(ChannelMask::all()),
            "accel" => Ok(ChannelMask::accel_only()),
            "gyro" => Ok(ChannelMask::gyro_only()),
            other => {
                let features = other
                    .split(',')
                    .map(|name| {
                        Feature::ALL
                            .into_iter()
                            .find(|f| f.as_str() == name.trim())
                            .ok_or_else(|| format!("unknown feature `{name}`"))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ChannelMask { features })
            }
        }
    }
}

impl fmt::Display for ChannelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == ChannelMask::all() {
            f.write_str("all")
        } else if *self == ChannelMask::accel_only() {
            f.write_str("accel")
        } else if *self == ChannelMask::gyro_only() {
            f.write_str("gyro")
        } else {
            let names: Vec<&str> = self.features.iter().map(|x| x.as_str()).collect();
            f.write_str(&names.join(","))
        }
    }
}

/// Quantile by linear interpolation between order statistics: with sorted
/// values `x` and `h = (n - 1) p`, returns `x[⌊h⌋] + (h - ⌊h⌋)(x[⌈h⌉] - x[⌊h⌋])`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// Computes the seven features of one window, in [`Feature::ALL`] order.
pub fn extract_features(window: &Window<'_>) -> Result<[f64; FEATURES_PER_SENSOR], WindowError> {
    features_of(window.samples())
}

pub fn features_of(samples: &[SensorSample]) -> Result<[f64; FEATURES_PER_SENSOR], WindowError> {
    let n = samples.len();
    if n == 0 {
        return Err(WindowError::EmptyWindow);
    }
    let mut ax: Vec<f64> = samples.iter().map(|s| s.accel_x).collect();
    ax.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&ax, 0.75) - quantile_sorted(&ax, 0.25);
    let peak = ax.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok([
        mean(samples.iter().map(|s| s.gyro_z), n),
        mean(samples.iter().map(|s| s.gyro_x), n),
        mean(ax.iter().copied(), n),
        mean(samples.iter().map(|s| s.accel_y), n),
        mean(samples.iter().map(|s| s.accel_z), n),
        iqr,
        peak,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    Nearest,
    WindowMean,
    Interpolate,
}

impl FromStr for LabelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(LabelMode::Nearest),
            "window_mean" | "window-mean" => Ok(LabelMode::WindowMean),
            "interpolate" => Ok(LabelMode::Interpolate),
            other => Err(format!("unknown label mode `{other}`")),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::Nearest => "nearest",
            LabelMode::WindowMean => "window_mean",
            LabelMode::Interpolate => "interpolate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPolicy {
    pub mode: LabelMode,
    pub max_gap_s: f64,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        LabelPolicy { mode: LabelMode::Nearest, max_gap_s: 2.0 }
    }
}

impl LabelPolicy {
    fn validate(&self) -> Result<(), WindowError> {
        if !(self.max_gap_s > 0.0) {
            return Err(WindowError::InvalidConfig(format!(
                "max_gap_s must be positive, got {}",
                self.max_gap_s
            )));
        }
        Ok(())
    }
}

/// Per-window labels; `None` marks a window dropped by the gap rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub values: Vec<Option<f64>>,
    pub dropped: usize,
}

/// Assigns each window a magnitude of `gas` from the emission records.
pub fn label_windows(
    spans: &[WindowSpan],
    emissions: &EmissionSeries,
    gas: GasId,
    policy: &LabelPolicy,
) -> Result<Labels, WindowError> {
    let values = emissions.channel(gas)?;
    label_series(spans, &emissions.times(), &values, policy)
}

fn label_series(
    spans: &[WindowSpan],
    times: &[f64],
    values: &[f64],
    policy: &LabelPolicy,
) -> Result<Labels, WindowError> {
    policy.validate()?;
    if spans.is_empty() || times.is_empty() {
        return Err(WindowError::AllWindowsDropped(spans.len()));
    }
    let labels: Vec<Option<f64>> = spans
        .iter()
        .map(|span| {
            let c = span.center_t;
            let near = nearest_index(times, c);
            if (times[near] - c).abs() > policy.max_gap_s {
                return None;
            }
            Some(match policy.mode {
                LabelMode::Nearest => values[near],
                LabelMode::WindowMean => {
                    let lo = times.partition_point(|&t| t < span.start_t);
                    let hi = times.partition_point(|&t| t <= span.end_t);
                    if hi > lo {
                        values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
                    } else {
                        values[near]
                    }
                }
                LabelMode::Interpolate => interpolate(times, values, c, near),
            })
        })
        .collect();
    let dropped = labels.iter().filter(|l| l.is_none()).count();
    if dropped == labels.len() {
        return Err(WindowError::AllWindowsDropped(dropped));
    }
    Ok(Labels { values: labels, dropped })
}

/// Index of the time closest to `t`; ties go to the earlier record.
fn nearest_index(times: &[f64], t: f64) -> usize {
    let right = times.partition_point(|&x| x < t);
    if right == 0 {
        0
    } else if right == times.len() {
        times.len() - 1
    } else if t - times[right - 1] <= times[right] - t {
        right - 1
    } else {
        right
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64, nearest: usize) -> f64 {
    let right = times.partition_point(|&x| x < t);
    if right < times.len() && times[right] == t {
        return values[right];
    }
    if right == 0 || right == times.len() {
        return values[nearest];
    }
    let (t0, t1) = (times[right - 1], times[right]);
    let (v0, v1) = (values[right - 1], values[right]);
    v0 + (t - t0) * (v1 - v0) / (t1 - t0)
}

/// Builds a feature matrix with per-gas targets from one or more sensors.
///
/// Windows are cut on the first sensor's clock over the span covered by every
/// sensor. Each additional sensor contributes, for every sample of the first
/// sensor's window, its sample nearest in time. Feature blocks are
/// concatenated in sensor order. NOX is derived when NO and NO2 are present.
pub fn build_dataset(
    sensors: &[SensorSeries],
    emissions: &EmissionSeries,
    cfg: &WindowConfig,
    policy: &LabelPolicy,
    mask: &ChannelMask,
) -> Result<Dataset, WindowError> {
    cfg.validate()?;
    policy.validate()?;
    mask.validate()?;
    let primary = sensors
        .first()
        .ok_or_else(|| WindowError::InvalidConfig("at least one sensor series is required".into()))?;

    let base_offset = primary.epoch_offset_s().unwrap_or(0.0);
    let shift_of = |o: Option<f64>| o.unwrap_or(0.0) - base_offset;

    let mut span_start = f64::NEG_INFINITY;
    let mut span_end = f64::INFINITY;
    for s in sensors {
        let shift = shift_of(s.epoch_offset_s());
        let samples = s.samples();
        span_start = span_start.max(samples[0].t + shift);
        span_end = span_end.min(samples[samples.len() - 1].t + shift);
    }
    if span_start > span_end {
        return Err(WindowError::NoTemporalOverlap("sensor series share no common time span".into()));
    }

    let e_shift = shift_of(emissions.epoch_offset_s());
    let e_times: Vec<f64> = emissions.times().iter().map(|t| t + e_shift).collect();
    let (e_first, e_last) = (e_times[0], e_times[e_times.len() - 1]);
    if e_last < span_start || e_first > span_end {
        return Err(WindowError::NoTemporalOverlap(format!(
            "emission records cover [{e_first}, {e_last}] s, sensors cover [{span_start}, {span_end}] s"
        )));
    }

    let all = primary.samples();
    let lo = all.partition_point(|s| s.t < span_start);
    let hi = all.partition_point(|s| s.t <= span_end);
    let windows = segment_samples(&all[lo..hi], primary.rate_hz(), cfg)?;

    let others: Vec<(f64, Vec<f64>, &[SensorSample])> = sensors[1..]
        .iter()
        .map(|s| {
            let shift = shift_of(s.epoch_offset_s());
            let times = s.samples().iter().map(|x| x.t + shift).collect();
            (shift, times, s.samples())
        })
        .collect();

    let per_sensor = mask.features.len();
    let n_cols = per_sensor * sensors.len();
    let rows: Vec<Vec<f64>> = windows
        .par_iter()
        .map(|w| {
            let mut row = Vec::with_capacity(n_cols);
            let f = features_of(w.samples()).expect("non-empty window");
            row.extend(mask.features.iter().map(|feat| f[feat.index()]));
            for (_, times, samples) in &others {
                let paired: Vec<SensorSample> = w
                    .samples()
                    .iter()
                    .map(|s| samples[nearest_index(times, s.t)])
                    .collect();
                let f = features_of(&paired).expect("non-empty window");
                row.extend(mask.features.iter().map(|feat| f[feat.index()]));
            }
            row
        })
        .collect();

    let emissions = if emissions.contains(GasId::No)
        && emissions.contains(GasId::No2)
        && !emissions.contains(GasId::Nox)
    {
        derive_nox(emissions)?
    } else {
        emissions.clone()
    };
    let gases: Vec<GasId> = emissions.gases().iter().copied().filter(|g| g.is_modeled()).collect();
    if gases.is_empty() {
        return Err(WindowError::MissingChannel(GasId::Co));
    }
    let spans: Vec<WindowSpan> = windows.iter().map(|w| w.span).collect();
    let mut labels = BTreeMap::new();
    for &gas in &gases {
        let values = emissions.channel(gas)?;
        labels.insert(gas, label_series(&spans, &e_times, &values, policy)?.values);
    }
    let keep: Vec<usize> = (0..windows.len())
        .filter(|&i| labels.values().all(|l| l[i].is_some()))
        .collect();
    if keep.is_empty() {
        return Err(WindowError::AllWindowsDropped(windows.len()));
    }

    let mut x = Array2::<f64>::zeros((keep.len(), n_cols));
    for (r, &i) in keep.iter().enumerate() {
        for (c, v) in rows[i].iter().enumerate() {
            x[[r, c]] = *v;
        }
    }
    let y = labels
        .into_iter()
        .map(|(gas, l)| (gas, keep.iter().map(|&i| l[i].expect("kept")).collect::<Array1<f64>>()))
        .collect();
    let centers = keep.iter().map(|&i| spans[i].center_t).collect();

    let feature_names = sensors
        .iter()
        .flat_map(|s| {
            mask.features
                .iter()
                .map(move |f| format!("{}_{}", s.sensor_id(), f.as_str()))
        })
        .collect();
    let provenance = DatasetProvenance {
        window: *cfg,
        label_policy: *policy,
        channel_mask: mask.clone(),
        sensors: sensors.iter().map(|s| s.sensor_id().to_string()).collect(),
        windows_total: windows.len(),
        dropped: windows.len() - keep.len(),
    };
    Dataset::new(feature_names, x, y, centers, Some(provenance))
        .map_err(|e| WindowError::InvalidConfig(e.to_string()))
}
