//! The self-contained result of one experiment.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Metric};

/// A metric value that survives JSON round trips even when infinite or NaN
/// (those are written as the strings `"inf"`, `"-inf"` and `"nan"`).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                match v {
                    "inf" => Ok(Num(f64::INFINITY)),
                    "-inf" => Ok(Num(f64::NEG_INFINITY)),
                    "nan" => Ok(Num(f64::NAN)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

pub fn nums(values: &[f64]) -> Vec<Num> {
    values.iter().copied().map(Num).collect()
}

pub fn raw(values: &[Num]) -> Vec<f64> {
    values.iter().map(|n| n.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialInfo {
    pub index: usize,
    pub seed: u64,
    pub stream_length: usize,
    /// FNV-1a hash of the sample stream every estimator in the trial read.
    pub stream_checksum: String,
}

/// One metric for one estimator across trials and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub estimator: String,
    pub metric: Metric,
    pub checkpoints: Vec<u64>,
    /// `values[trial][checkpoint]`.
    pub values: Vec<Vec<Num>>,
    pub mean: Vec<Num>,
    pub stderr: Vec<Num>,
}

impl Series {
    pub fn new(estimator: String, metric: Metric, checkpoints: Vec<u64>, values: Vec<Vec<f64>>) -> Self {
        let (mean, stderr) = mean_and_stderr(&values);
        Self {
            estimator,
            metric,
            checkpoints,
            values: values.iter().map(|row| nums(row)).collect(),
            mean: nums(&mean),
            stderr: nums(&stderr),
        }
    }
}

/// Column means and standard errors of `rows[trial][checkpoint]`, summed in
/// trial order.
pub fn mean_and_stderr(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let Some(first) = rows.first() else {
        return (Vec::new(), Vec::new());
    };
    let t = rows.len() as f64;
    let mut mean = vec![0.0; first.len()];
    let mut stderr = vec![0.0; first.len()];
    for c in 0..first.len() {
        mean[c] = rows.iter().map(|r| r[c]).sum::<f64>() / t;
        if rows.len() > 1 {
            let var = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / (t - 1.0);
            stderr[c] = (var / t).sqrt();
        }
    }
    (mean, stderr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestInClassRecord {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub gradient_mapping_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuRecord {
    /// The value used by schedules and bounds.
    pub value: f64,
    pub overridden: bool,
    pub estimated: Option<f64>,
    pub per_probe: Vec<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub dictionary_size: usize,
    pub reference_size: Option<usize>,
    pub best_in_class: Option<BestInClassRecord>,
    pub nu: Option<NuRecord>,
    pub g_infinity: Num,
    pub log_g_infinity: f64,
    pub g_infinity_overridden: bool,
    pub r_phi_euclidean: f64,
    pub r_phi_entropy: f64,
}

/// A theorem bound evaluated at each checkpoint, next to the statement form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub estimator: String,
    pub metric: Metric,
    pub bound: String,
    pub checkpoints: Vec<u64>,
    pub values: Vec<Num>,
    pub statement_values: Vec<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitRecord {
    pub estimator: String,
    pub metric: Metric,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub label: String,
    pub resolution: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Row-major by x then y.
    pub values: Vec<f64>,
}

/// Quadrature KL at the configured and at half resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionCheck {
    pub estimator: String,
    pub checkpoint: u64,
    pub resolution: usize,
    pub value: Num,
    pub half_resolution_value: Option<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameter {
    pub estimator: String,
    pub trial: usize,
    pub checkpoint: u64,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub estimator: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub version: String,
    pub config: ExperimentConfig,
    pub base_seed: u64,
    pub trials: Vec<TrialInfo>,
    pub oracles: OracleRecord,
    pub series: Vec<Series>,
    pub bounds: Vec<BoundCurve>,
    pub rate_fits: Vec<RateFitRecord>,
    pub heatmaps: Vec<Heatmap>,
    pub resolution_checks: Vec<ResolutionCheck>,
    pub hyperparameters: Vec<Hyperparameter>,
    pub timings: Vec<Timing>,
}

impl ExperimentRecord {
    pub fn series(&self, estimator: &str, metric: Metric) -> Option<&Series> {
        self.series.iter().find(|s| s.estimator == estimator && s.metric == metric)
    }

    pub fn bound(&self, estimator: &str, metric: Metric) -> Option<&BoundCurve> {
        self.bounds.iter().find(|b| b.estimator == estimator && b.metric == metric)
    }
}
