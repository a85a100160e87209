//! Checks the strongly convex last-iterate guarantees on a categorical run.

use mixest_core::estimators::{OutputMode, SignConvention};
use mixest_core::evaluation::fit_rate;
use mixest_core::MirrorKind;
use serde::{Deserialize, Serialize};

use crate::config::{EstimatorSpec, ExperimentConfig, Method, Metric, ScheduleSpec};
use crate::error::{BenchError, BenchResult};
use crate::record::{raw, ExperimentRecord};
use crate::run::{run_experiment, RunOptions};

pub const MIN_TRIALS: usize = 50;
/// Required upper limit on the fitted log-log slope.
pub const MAX_SLOPE: f64 = -0.8;
/// Checkpoints below this are excluded from the slope fit (pre-asymptotic).
pub const FIT_FROM: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Replaces the estimators of `config` with last-iterate SGD and Exp-SMD
/// under the `2/(ν(i+1))` schedule and requests the matching metrics.
pub fn theorem_config(config: &ExperimentConfig) -> BenchResult<ExperimentConfig> {
    if config.target.build().map_err(|e| BenchError::from_core("target", e))?.pmf().is_none() {
        return Err(BenchError::Config("verify-theorems needs a categorical target".into()));
    }
    if config.trials < MIN_TRIALS {
        return Err(BenchError::Config(format!("verify-theorems needs at least {MIN_TRIALS} trials, got {}", config.trials)));
    }
    let spec = |name: &str, mirror| EstimatorSpec {
        name: name.into(),
        method: Method::Smd,
        mirror,
        schedule: ScheduleSpec::StronglyConvex { nu: None },
        output: OutputMode::LastIterate,
        sign: SignConvention::Descent,
    };
    let mut out = config.clone();
    out.estimators = vec![spec("sgd", MirrorKind::Euclidean), spec("exp_smd", MirrorKind::NegativeEntropy)];
    out.baselines.clear();
    out.metrics = vec![Metric::L2VsBestInClass, Metric::KlVsBestInClass];
    out.oracles.best_in_class = true;
    out.oracles.nu = true;
    if out.checkpoints.is_none() && out.n >= FIT_FROM {
        // Start the fit window exactly at FIT_FROM so N = 1000 spans two decades.
        let mut cps = vec![0, FIT_FROM];
        cps.extend(crate::config::log_checkpoints(out.n, out.checkpoint_count));
        cps.sort_unstable();
        cps.dedup();
        out.checkpoints = Some(cps);
    }
    Ok(out)
}

/// Bound and slope checks over the record of a [`theorem_config`] run.
pub fn check_record(record: &ExperimentRecord) -> VerifyReport {
    let mut checks = Vec::new();
    for bound in &record.bounds {
        let Some(series) = record.series(&bound.estimator, bound.metric) else { continue };
        let mean = raw(&series.mean);
        let limit = raw(&bound.values);
        let violations: Vec<u64> = series
            .checkpoints
            .iter()
            .zip(mean.iter().zip(&limit))
            .filter(|(_, (m, b))| !(**m <= **b))
            .map(|(c, _)| *c)
            .collect();
        let worst = mean.iter().zip(&limit).map(|(m, b)| m / b).fold(0.0, f64::max);
        checks.push(Check {
            name: format!("{} {} below {}", bound.estimator, bound.metric.label(), bound.bound),
            passed: violations.is_empty(),
            detail: if violations.is_empty() {
                format!("max mean/bound ratio {worst:.4}")
            } else {
                format!("exceeded at checkpoints {violations:?}")
            },
        });

        let points: Vec<(f64, f64)> = series
            .checkpoints
            .iter()
            .zip(&mean)
            .filter(|(c, _)| **c >= FIT_FROM)
            .map(|(c, m)| (*c as f64, *m))
            .collect();
        let (passed, detail) = match fit_rate(&points) {
            Ok(fit) => (
                fit.slope <= MAX_SLOPE,
                format!("slope {:.3} (R² {:.3}, {} points)", fit.slope, fit.r_squared, fit.points),
            ),
            Err(e) => (false, format!("rate fit failed: {e}")),
        };
        checks.push(Check {
            name: format!("{} {} slope <= {MAX_SLOPE}", bound.estimator, bound.metric.label()),
            passed,
            detail,
        });
    }
    if checks.is_empty() {
        checks.push(Check {
            name: "bound curves present".into(),
            passed: false,
            detail: "the run produced no bound curves; check that nu and G_inf are finite".into(),
        });
    }
    VerifyReport { checks }
}

/// Runs the theorem configuration and checks it.
pub fn verify_theorems(config: &ExperimentConfig, options: &RunOptions) -> BenchResult<(ExperimentRecord, VerifyReport)> {
    let config = theorem_config(config)?;
    let record = run_experiment(&config, options)?;
    let report = check_record(&record);
    Ok((record, report))
}
