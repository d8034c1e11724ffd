//! Estimating construction-equipment exhaust emissions from inertial sensor
//! streams: ingestion, windowed feature extraction, four regressor families,
//! accuracy metrics, experiment orchestration and a synthetic data generator.

pub mod dataset;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod synth;
pub mod windowing;
