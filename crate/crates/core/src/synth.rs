//! Seeded excavator-like sensor and gas-analyzer streams with a closed-form
//! emission ground truth.
//!
//! Each activity state sets a constant offset plus one sinusoid per inertial
//! channel. Default frequencies are multiples of 4 Hz so a 25-sample window at
//! 100 Hz spans whole periods and its channel means equal the state offsets.
//! Default offsets and amplitudes grow along a single intensity axis while
//! emission multipliers do not, so a linear learner cannot recover the
//! emission levels from the features but a partitioning learner can.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    EmissionRecord, EmissionSeries, GasId, IngestError, Reading, SensorSample, SensorSeries,
    ACCEL_FULL_SCALE_G, GYRO_FULL_SCALE_DPS,
};
use crate::windowing::{segment_samples, WindowConfig, WindowError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Window(#[from] WindowError),
}

impl SynthError {
    pub fn name(&self) -> &'static str {
        match self {
            SynthError::InvalidConfig(_) => "InvalidConfig",
            SynthError::Ingest(e) => e.name(),
            SynthError::Window(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityState {
    Idle,
    Dig,
    Swing,
    Dump,
}

impl ActivityState {
    pub const ALL: [ActivityState; 4] =
        [ActivityState::Idle, ActivityState::Dig, ActivityState::Swing, ActivityState::Dump];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityState::Idle => "idle",
            ActivityState::Dig => "dig",
            ActivityState::Swing => "swing",
            ActivityState::Dump => "dump",
        }
    }
}

impl fmt::Display for ActivityState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivityState::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown activity state `{s}` (expected idle, dig, swing or dump)"))
    }
}

/// Motion of one state, for the fully coupled (stick) sensor. Channel order
/// within each array is x, y, z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub accel_offset: [f64; 3],
    pub accel_amplitude: [f64; 3],
    pub gyro_offset: [f64; 3],
    pub gyro_amplitude: [f64; 3],
    pub frequency_hz: f64,
}

impl MotionProfile {
    /// Default profile at a given engagement level.
    fn at_intensity(s: f64, frequency_hz: f64) -> Self {
        MotionProfile {
            accel_offset: [0.05 + 0.25 * s, 0.02 + 0.10 * s, 1.0 + 0.15 * s],
            accel_amplitude: [0.05 + 0.20 * s, 0.03 + 0.10 * s, 0.04 + 0.12 * s],
            gyro_offset: [0.5 + 2.0 * s, 0.2 + 1.0 * s, 1.0 + 12.0 * s],
            gyro_amplitude: [1.0 + 4.0 * s, 1.0 + 2.0 * s, 2.0 + 10.0 * s],
            frequency_hz,
        }
    }
}

/// Base concentration of one gas and its multiplier in each activity state,
/// indexed as [`ActivityState::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasProfile {
    pub gas: GasId,
    pub base: f64,
    pub multipliers: [f64; 4],
}

impl GasProfile {
    pub fn level(&self, state: ActivityState) -> f64 {
        self.base * self.multipliers[state.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub duration_s: f64,
    pub rate_hz: f64,
    pub pems_rate_hz: f64,
    /// Time of the first analyzer record; a half-period phase keeps records
    /// away from whole-second state boundaries.
    pub pems_phase_s: f64,
    /// Repeated until `duration_s` is covered.
    pub cycle: Vec<(ActivityState, f64)>,
    /// Indexed as [`ActivityState::ALL`].
    pub motion: [MotionProfile; 4],
    /// Amplitude factor of the cabin sensor relative to the stick sensor.
    pub cabin_attenuation: f64,
    pub gases: Vec<GasProfile>,
    /// Per-sample noise scale: accelerometer std in g, gyroscope std
    /// `10 × noise_std` in deg/s, gas std `noise_std × base`.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        use ActivityState::*;
        let gas = |gas, base, multipliers| GasProfile { gas, base, multipliers };
        SynthConfig {
            duration_s: 600.0,
            rate_hz: 100.0,
            pems_rate_hz: 1.0,
            pems_phase_s: 0.5,
            cycle: vec![(Idle, 10.0), (Dig, 12.0), (Swing, 9.0), (Dump, 7.0), (Swing, 8.0)],
            // Engagement: idle 0, swing 1, dump 2, dig 3.
            motion: [
                MotionProfile::at_intensity(0.0, 4.0),
                MotionProfile::at_intensity(3.0, 8.0),
                MotionProfile::at_intensity(1.0, 8.0),
                MotionProfile::at_intensity(2.0, 4.0),
            ],
            cabin_attenuation: 0.4,
            //                       idle  dig  swing dump
            gases: vec![
                gas(GasId::No, 150.0, [1.0, 4.0, 3.0, 1.2]),
                gas(GasId::No2, 20.0, [1.0, 3.0, 3.5, 1.5]),
                gas(GasId::Co, 60.0, [1.0, 5.0, 3.5, 1.5]),
                gas(GasId::Co2, 2.0, [1.0, 4.5, 3.0, 1.8]),
                gas(GasId::O2, 19.5, [1.0, 0.90, 0.93, 0.97]),
                gas(GasId::So2, 3.0, [1.0, 2.0, 1.5, 1.2]),
                gas(GasId::Ch4, 8.0, [1.0, 1.5, 1.3, 1.1]),
                gas(GasId::H2s, 0.5, [1.0, 1.0, 1.0, 1.0]),
                gas(GasId::TAir, 25.0, [1.0, 1.0, 1.0, 1.0]),
                gas(GasId::TGas, 120.0, [1.0, 2.0, 1.6, 1.3]),
            ],
            noise_std: 0.1,
            seed: 0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), SynthError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(SynthError::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        positive("duration_s", self.duration_s)?;
        positive("rate_hz", self.rate_hz)?;
        positive("pems_rate_hz", self.pems_rate_hz)?;
        if !(self.pems_phase_s >= 0.0 && self.pems_phase_s < self.duration_s) {
            return Err(SynthError::InvalidConfig(format!(
                "pems_phase_s must lie in [0, duration_s), got {}",
                self.pems_phase_s
            )));
        }
        if self.cycle.is_empty() {
            return Err(SynthError::InvalidConfig("activity cycle is empty".into()));
        }
        for (state, dwell) in &self.cycle {
            positive(&format!("dwell time of {state}"), *dwell)?;
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(SynthError::InvalidConfig(format!(
                "noise_std must be non-negative, got {}",
                self.noise_std
            )));
        }
        if !(self.cabin_attenuation >= 0.0 && self.cabin_attenuation.is_finite()) {
            return Err(SynthError::InvalidConfig("cabin_attenuation must be non-negative".into()));
        }
        for m in &self.motion {
            let values = m.accel_offset.iter().chain(&m.accel_amplitude).chain(&m.gyro_offset).chain(&m.gyro_amplitude);
            if !values.chain([&m.frequency_hz]).all(|v| v.is_finite()) {
                return Err(SynthError::InvalidConfig("motion parameters must be finite".into()));
            }
        }
        for required in [GasId::No, GasId::No2, GasId::Co, GasId::Co2] {
            if !self.gases.iter().any(|g| g.gas == required) {
                return Err(SynthError::InvalidConfig(format!("gas profile for {required} is required")));
            }
        }
        for g in &self.gases {
            if g.gas == GasId::Nox {
                return Err(SynthError::InvalidConfig("NOX is derived from NO and NO2, not generated".into()));
            }
            if !(g.base.is_finite() && g.multipliers.iter().all(|m| m.is_finite())) {
                return Err(SynthError::InvalidConfig(format!("gas profile for {} must be finite", g.gas)));
            }
        }
        Ok(())
    }

    fn cycle_length(&self) -> f64 {
        self.cycle.iter().map(|(_, d)| d).sum()
    }

    /// Activity state at time `t`; state intervals are closed on the left.
    pub fn state_at(&self, t: f64) -> ActivityState {
        let mut u = t.rem_euclid(self.cycle_length());
        for &(state, dwell) in &self.cycle {
            if u < dwell {
                return state;
            }
            u -= dwell;
        }
        self.cycle[self.cycle.len() - 1].0
    }

    /// Noiseless emission level of every generated gas, plus NOX when NO and
    /// NO2 are both generated.
    pub fn levels(&self, state: ActivityState) -> BTreeMap<GasId, f64> {
        let mut out: BTreeMap<GasId, f64> = self.gases.iter().map(|g| (g.gas, g.level(state))).collect();
        if let (Some(no), Some(no2)) = (out.get(&GasId::No), out.get(&GasId::No2)) {
            out.insert(GasId::Nox, no + no2);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSegment {
    pub state: ActivityState,
    pub start_t: f64,
    pub end_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    pub t: f64,
    pub state: ActivityState,
    pub emissions: BTreeMap<GasId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// State timeline clipped to the generated duration.
    pub segments: Vec<StateSegment>,
    /// Noiseless level at each analyzer record time.
    pub records: Vec<TruthPoint>,
    /// State and noiseless level at each window center of the default
    /// segmentation of the sensor streams.
    pub windows: Vec<TruthPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// Cabin sensor `s1` (attenuated) and stick sensor `s2`.
    pub sensors: [SensorSeries; 2],
    pub emissions: EmissionSeries,
    pub truth: GroundTruth,
}

/// Independent noise stream per generated signal.
fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sensor(cfg: &SynthConfig, id: &str, attenuation: f64, stream: u64) -> Result<SensorSeries, SynthError> {
    let n = (cfg.duration_s * cfg.rate_hz).round() as usize;
    let mut rng = noise_rng(cfg.seed, stream);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / cfg.rate_hz;
        let m = &cfg.motion[cfg.state_at(t).index()];
        let w = 2.0 * PI * m.frequency_hz * t;
        let mut ch = [0.0; 6];
        for c in 0..3 {
            let phase = c as f64 * PI / 3.0;
            let za: f64 = rng.sample(StandardNormal);
            let zg: f64 = rng.sample(StandardNormal);
            ch[c] = (m.accel_offset[c] + attenuation * m.accel_amplitude[c] * (w + phase).sin()
                + cfg.noise_std * za)
                .clamp(-ACCEL_FULL_SCALE_G, ACCEL_FULL_SCALE_G);
            ch[3 + c] = (m.gyro_offset[c] + attenuation * m.gyro_amplitude[c] * (w + phase).sin()
                + 10.0 * cfg.noise_std * zg)
                .clamp(-GYRO_FULL_SCALE_DPS, GYRO_FULL_SCALE_DPS);
        }
        samples.push(SensorSample {
            t,
            accel_x: ch[0],
            accel_y: ch[1],
            accel_z: ch[2],
            gyro_x: ch[3],
            gyro_y: ch[4],
            gyro_z: ch[5],
        });
    }
    Ok(SensorSeries::new(id, cfg.rate_hz, samples)?)
}

fn segments(cfg: &SynthConfig) -> Vec<StateSegment> {
    let mut out = Vec::new();
    let mut t = 0.0;
    'outer: loop {
        for &(state, dwell) in &cfg.cycle {
            if t >= cfg.duration_s {
                break 'outer;
            }
            let end = (t + dwell).min(cfg.duration_s);
            out.push(StateSegment { state, start_t: t, end_t: end });
            t += dwell;
        }
    }
    out
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let cabin = sensor(cfg, "s1", cfg.cabin_attenuation, 0)?;
    let stick = sensor(cfg, "s2", 1.0, 1)?;

    let mut rng = noise_rng(cfg.seed, 2);
    let n_records = ((cfg.duration_s - cfg.pems_phase_s) * cfg.pems_rate_hz).ceil() as usize;
    let mut records = Vec::with_capacity(n_records);
    let mut truth_records = Vec::with_capacity(n_records);
    for k in 0..n_records {
        let t = cfg.pems_phase_s + k as f64 / cfg.pems_rate_hz;
        let state = cfg.state_at(t);
        let mut values = BTreeMap::new();
        for g in &cfg.gases {
            let z: f64 = rng.sample(StandardNormal);
            let (lo, hi) = g.gas.range();
            let value = (g.level(state) + cfg.noise_std * g.base * z).clamp(lo, hi);
            values.insert(g.gas, Reading { value, unit: g.gas.unit() });
        }
        records.push(EmissionRecord { t, values });
        truth_records.push(TruthPoint { t, state, emissions: cfg.levels(state) });
    }
    let emissions = EmissionSeries::new(records)?;

    let windows = segment_samples(cabin.samples(), cfg.rate_hz, &WindowConfig::default())
        .map(|ws| {
            ws.iter()
                .map(|w| {
                    let state = cfg.state_at(w.span.center_t);
                    TruthPoint { t: w.span.center_t, state, emissions: cfg.levels(state) }
                })
                .collect()
        })
        .unwrap_or_default();

    Ok(SynthOutput {
        sensors: [cabin, stick],
        emissions,
        truth: GroundTruth { segments: segments(cfg), records: truth_records, windows },
    })
}
