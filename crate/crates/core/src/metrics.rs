//! Regression metrics: coefficient of determination, RMSE, MAE, and
//! range-normalized RMSE in percent.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("LengthMismatch: {actual} actual values vs {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("TooFewSamples: {0} (need at least 2)")]
    TooFewSamples(usize),
    #[error("NonFinite: input contains a non-finite value")]
    NonFinite,
}

impl MetricError {
    pub fn name(&self) -> &'static str {
        match self {
            MetricError::LengthMismatch { .. } => "LengthMismatch",
            MetricError::TooFewSamples(_) => "TooFewSamples",
            MetricError::NonFinite => "NonFinite",
        }
    }
}

/// A metric that is either a number or undefined because its denominator vanished.
///
/// Serializes as a plain number or as the string `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MetricValue {
    Defined(f64),
    #[default]
    Undefined,
}

impl MetricValue {
    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(v),
            MetricValue::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, MetricValue::Defined(_))
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MetricValue::Defined(v) => s.serialize_f64(*v),
            MetricValue::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for MetricValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = MetricValue;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"undefined\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<MetricValue, E> {
                Ok(MetricValue::Defined(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<MetricValue, E> {
                Ok(MetricValue::Defined(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<MetricValue, E> {
                Ok(MetricValue::Defined(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<MetricValue, E> {
                if v == "undefined" {
                    Ok(MetricValue::Undefined)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Which value range normalizes RMSE into NRMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorMode {
    /// max − min of the predictions.
    #[default]
    PredictedRange,
    /// max − min of the actual values.
    ActualRange,
}

impl FromStr for DenominatorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "predicted" | "predicted_range" => Ok(DenominatorMode::PredictedRange),
            "actual" | "actual_range" => Ok(DenominatorMode::ActualRange),
            other => Err(format!("unknown NRMSE denominator `{other}`")),
        }
    }
}

impl fmt::Display for DenominatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenominatorMode::PredictedRange => "predicted",
            DenominatorMode::ActualRange => "actual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Undefined when the actual values have zero variance.
    pub r2: MetricValue,
    pub rmse: f64,
    pub mae: f64,
    /// Undefined when the normalizing range is zero.
    pub nrmse_pct: MetricValue,
    pub n: usize,
    pub denominator_mode: DenominatorMode,
}

fn range(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

pub fn compute_metrics(
    actual: &[f64],
    predicted: &[f64],
    mode: DenominatorMode,
) -> Result<MetricReport, MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let n = actual.len();
    if n < 2 {
        return Err(MetricError::TooFewSamples(n));
    }
    if !actual.iter().chain(predicted).all(|v| v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let nf = n as f64;
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    let sae: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum();
    let mean = actual.iter().sum::<f64>() / nf;
    let sst: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();

    let rmse = (sse / nf).sqrt();
    let r2 = if sst == 0.0 {
        MetricValue::Undefined
    } else {
        MetricValue::Defined(1.0 - sse / sst)
    };
    let span = match mode {
        DenominatorMode::PredictedRange => range(predicted),
        DenominatorMode::ActualRange => range(actual),
    };
    let nrmse_pct = if span == 0.0 {
        MetricValue::Undefined
    } else {
        MetricValue::Defined(rmse / span * 100.0)
    };
    Ok(MetricReport {
        r2,
        rmse,
        mae: sae / nf,
        nrmse_pct,
        n,
        denominator_mode: mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], DenominatorMode::PredictedRange)
            .unwrap();
        assert_eq!(m.r2, MetricValue::Defined(1.0));
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.nrmse_pct, MetricValue::Defined(0.0));
        assert_eq!(m.n, 3);
    }

    #[test]
    fn constant_predictor() {
        let a = [1.0, 2.0, 3.0];
        let p = [2.0, 2.0, 2.0];
        let m = compute_metrics(&a, &p, DenominatorMode::PredictedRange).unwrap();
        assert!((m.rmse - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.r2, MetricValue::Defined(0.0));
        assert_eq!(m.nrmse_pct, MetricValue::Undefined);
        let m = compute_metrics(&a, &p, DenominatorMode::ActualRange).unwrap();
        assert!((m.nrmse_pct.value().unwrap() - 40.824829046386306).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_actual() {
        let m = compute_metrics(&[4.0, 4.0, 4.0], &[1.0, 5.0, 9.0], DenominatorMode::PredictedRange)
            .unwrap();
        assert_eq!(m.r2, MetricValue::Undefined);
        assert!(m.nrmse_pct.is_defined());
    }

    #[test]
    fn error_paths() {
        let e = compute_metrics(&[1.0, 2.0], &[1.0], DenominatorMode::ActualRange).unwrap_err();
        assert_eq!(e.name(), "LengthMismatch");
        let e = compute_metrics(&[1.0], &[1.0], DenominatorMode::ActualRange).unwrap_err();
        assert_eq!(e, MetricError::TooFewSamples(1));
        let e = compute_metrics(&[1.0, f64::NAN], &[1.0, 2.0], DenominatorMode::ActualRange)
            .unwrap_err();
        assert_eq!(e, MetricError::NonFinite);
    }

    #[test]
    fn r2_is_not_symmetric() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let p = [1.5, 1.5, 3.5, 3.5];
        let fwd = compute_metrics(&a, &p, DenominatorMode::ActualRange).unwrap();
        let rev = compute_metrics(&p, &a, DenominatorMode::ActualRange).unwrap();
        assert_eq!(fwd.rmse, rev.rmse);
        assert_eq!(fwd.mae, rev.mae);
        // SSE = 1, SST(a) = 5, SST(p) = 4.
        assert!((fwd.r2.value().unwrap() - 0.8).abs() < 1e-12);
        assert!((rev.r2.value().unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn training_mean_predictor_has_zero_r2() {
        let a = [3.0, 7.0, 1.0, 9.0, 5.0];
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        let m = compute_metrics(&a, &[mean; 5], DenominatorMode::ActualRange).unwrap();
        assert_eq!(m.r2, MetricValue::Defined(0.0));
    }

    #[test]
    fn undefined_serializes_as_string() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0], DenominatorMode::PredictedRange)
            .unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"nrmse_pct\":\"undefined\""));
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..50)) {
            let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = compute_metrics(&a, &p, DenominatorMode::ActualRange).unwrap();
            prop_assert!(m.rmse >= m.mae * (1.0 - 1e-12));
            prop_assert!(m.mae >= 0.0);
            if let Some(r2) = m.r2.value() {
                prop_assert!(r2 <= 1.0);
            }
        }
    }
}
