//! Declarative experiment configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use mixest_core::dictionary::{default_layers, GridLayer};
use mixest_core::estimators::{OutputMode, SignConvention};
use mixest_core::targets::TargetSpec;
use mixest_core::MirrorKind;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, BenchResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Base seed; trial seeds are derived from it. `MIXEST_SEED` overrides.
    #[serde(default)]
    pub seed: u64,
    pub target: TargetSpec,
    pub dictionary: DictionarySpec,
    #[serde(default)]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub baselines: Vec<BaselineSpec>,
    /// Stream length per trial.
    pub n: u64,
    /// Explicit checkpoints; when absent, `checkpoint_count` log-spaced
    /// values between 1 and `n`.
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default = "default_checkpoint_count")]
    pub checkpoint_count: usize,
    /// Prefix lengths at which baselines are refitted; defaults to the
    /// estimator checkpoints.
    #[serde(default)]
    pub baseline_checkpoints: Option<Vec<u64>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub oracles: OracleSpec,
    /// Cells per axis for quadrature KL on continuous targets.
    #[serde(default = "default_kl_resolution")]
    pub kl_resolution: usize,
    /// Cells per axis of the density heatmaps; 0 disables them.
    #[serde(default = "default_heatmap_resolution")]
    pub heatmap_resolution: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_checkpoint_count() -> usize {
    20
}

fn default_trials() -> usize {
    1
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::KlVsTarget]
}

fn default_kl_resolution() -> usize {
    400
}

fn default_heatmap_resolution() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionarySpec {
    /// Gaussian grid over the target's box.
    MultiscaleGaussian {
        #[serde(default = "default_layers")]
        layers: Vec<GridLayer>,
    },
    /// Smoothed point masses over the target's alphabet.
    Categorical { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Mirror descent on the simplex.
    #[default]
    Smd,
    /// Plain SGD on softmax logits.
    SoftmaxSgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub name: String,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_mirror")]
    pub mirror: MirrorKind,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub output: OutputMode,
    #[serde(default)]
    pub sign: SignConvention,
}

fn default_mirror() -> MirrorKind {
    MirrorKind::NegativeEntropy
}

/// Step-size rule; missing constants are filled in from the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `r_phi / (g_inf √horizon)`; horizon defaults to `n`, `r_phi` to the
    /// mirror map's diameter and `g_inf` to the dictionary bound.
    ConstantSqrtN {
        #[serde(default)]
        horizon: Option<u64>,
        #[serde(default)]
        r_phi: Option<f64>,
        #[serde(default)]
        g_inf: Option<f64>,
    },
    /// `2 / (ν (i + 1))`; `nu` defaults to the estimated constant.
    StronglyConvex {
        #[serde(default)]
        nu: Option<f64>,
    },
    PowerDecay { gamma0: f64, decay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineSpec {
    Kde {
        #[serde(default = "default_holdout")]
        holdout_fraction: f64,
        #[serde(default = "default_bandwidth_range")]
        bandwidth_range: [f64; 2],
        #[serde(default = "default_bandwidth_count")]
        bandwidth_count: usize,
    },
    Knn {
        #[serde(default)]
        k: Option<usize>,
        #[serde(default = "default_knn_delta")]
        delta: f64,
        #[serde(default = "default_knn_resolution")]
        resolution: usize,
    },
    AddConstant {
        #[serde(default = "default_constant")]
        constant: f64,
    },
}

fn default_holdout() -> f64 {
    0.2
}

fn default_bandwidth_range() -> [f64; 2] {
    [0.01, 10.0]
}

fn default_bandwidth_count() -> usize {
    30
}

fn default_knn_delta() -> f64 {
    mixest_core::baselines::DEFAULT_KNN_DELTA
}

fn default_knn_resolution() -> usize {
    400
}

fn default_constant() -> f64 {
    1.0
}

impl BaselineSpec {
    pub fn label(&self) -> &'static str {
        match self {
            BaselineSpec::Kde { .. } => "kde",
            BaselineSpec::Knn { .. } => "knn",
            BaselineSpec::AddConstant { .. } => "add_constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `KL(m* ‖ m)` between weight vectors.
    KlVsBestInClass,
    /// `KL(P* ‖ Q_m)`, exact for categorical targets and by quadrature
    /// otherwise.
    KlVsTarget,
    /// `‖m − m*‖²`.
    L2VsBestInClass,
    /// `L(m) − L(m*)` on the reference distribution.
    SuboptimalityGap,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::KlVsBestInClass => "kl_vs_best_in_class",
            Metric::KlVsTarget => "kl_vs_target",
            Metric::L2VsBestInClass => "l2_vs_best_in_class",
            Metric::SuboptimalityGap => "suboptimality_gap",
        }
    }

    pub fn needs_best_in_class(self) -> bool {
        !matches!(self, Metric::KlVsTarget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// Solve for `m*`.
    #[serde(default = "yes")]
    pub best_in_class: bool,
    /// Reference sample size for continuous targets.
    #[serde(default = "default_reference_size")]
    pub reference_size: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Estimate `ν`.
    #[serde(default = "yes")]
    pub nu: bool,
    /// Replaces the estimated `ν` everywhere it is used.
    #[serde(default)]
    pub nu_override: Option<f64>,
    /// Random interior probes besides the uniform vector.
    #[serde(default = "default_probes")]
    pub nu_probes: usize,
    /// Replaces the estimated `G_∞`.
    #[serde(default)]
    pub g_inf_override: Option<f64>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            best_in_class: true,
            reference_size: default_reference_size(),
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            nu: true,
            nu_override: None,
            nu_probes: default_probes(),
            g_inf_override: None,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_reference_size() -> usize {
    100_000
}

fn default_tolerance() -> f64 {
    mixest_core::evaluation::DEFAULT_SOLVER_TOLERANCE
}

fn default_max_iterations() -> usize {
    mixest_core::evaluation::DEFAULT_SOLVER_ITERATIONS
}

fn default_probes() -> usize {
    20
}

/// `count` distinct integers spaced evenly in log scale over `[1, n]`,
/// always ending at `n`.
pub fn log_checkpoints(n: u64, count: usize) -> Vec<u64> {
    if n == 0 || count == 0 {
        return Vec::new();
    }
    let mut out: Vec<u64> = mixest_core::baselines::log_spaced(1.0, n as f64, count.max(2))
        .into_iter()
        .map(|x| (x.round() as u64).clamp(1, n))
        .collect();
    out.dedup();
    out
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> BenchResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let config = if is_json { Self::from_json(&text)? } else { Self::from_toml(&text)? };
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> BenchResult<Self> {
        toml::from_str(text).map_err(|e| BenchError::Config(format!("invalid TOML config: {e}")))
    }

    pub fn from_json(text: &str) -> BenchResult<Self> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(format!("invalid JSON config: {e}")))
    }

    pub fn checkpoint_list(&self) -> Vec<u64> {
        match &self.checkpoints {
            Some(list) => list.clone(),
            None => log_checkpoints(self.n, self.checkpoint_count),
        }
    }

    pub fn baseline_checkpoint_list(&self) -> Vec<u64> {
        self.baseline_checkpoints.clone().unwrap_or_else(|| self.checkpoint_list())
    }

    pub fn validate(&self) -> BenchResult<()> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        for (label, list) in [("checkpoints", self.checkpoint_list()), ("baseline_checkpoints", self.baseline_checkpoint_list())] {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return fail(format!("{label} must be strictly increasing"));
            }
            if list.last().is_some_and(|&c| c > self.n) {
                return fail(format!("{label} exceed the stream length n = {}", self.n));
            }
        }
        let mut names: Vec<&str> = self.estimators.iter().map(|e| e.name.as_str()).collect();
        names.extend(self.baselines.iter().map(|b| b.label()));
        let mut sorted = names.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return fail("estimator and baseline names must be unique".into());
        }
        if names.iter().any(|n| n.is_empty() || n.contains(',')) {
            return fail("estimator names must be nonempty and free of commas".into());
        }
        let categorical = matches!(self.target, TargetSpec::SparseCategorical { .. } | TargetSpec::Categorical { .. });
        match (&self.dictionary, categorical) {
            (DictionarySpec::Categorical { .. }, false) => return fail("categorical dictionary needs a categorical target".into()),
            (DictionarySpec::MultiscaleGaussian { .. }, true) => {
                return fail("Gaussian dictionary needs a continuous target".into())
            }
            _ => {}
        }
        for b in &self.baselines {
            let ok = matches!(b, BaselineSpec::AddConstant { .. }) == categorical;
            if !ok {
                return fail(format!("baseline {} does not apply to this target", b.label()));
            }
        }
        if self.metrics.iter().any(|m| m.needs_best_in_class()) && !self.oracles.best_in_class {
            return fail("metrics relative to m* need oracles.best_in_class = true".into());
        }
        if !categorical && self.kl_resolution == 0 {
            return fail("kl_resolution must be positive".into());
        }
        Ok(())
    }

    /// Applies `value` at a dotted `path` such as `oracles.nu_probes` or
    /// `estimators.0.schedule.gamma0`.
    pub fn with_override(&self, path: &str, value: serde_json::Value) -> BenchResult<Self> {
        let mut tree = serde_json::to_value(self).map_err(|e| BenchError::Config(e.to_string()))?;
        let mut node = &mut tree;
        for key in path.split('.') {
            node = match node {
                serde_json::Value::Object(map) => map
                    .get_mut(key)
                    .ok_or_else(|| BenchError::Config(format!("unknown config key {key:?} in {path:?}")))?,
                serde_json::Value::Array(items) => {
                    let idx: usize =
                        key.parse().map_err(|_| BenchError::Config(format!("expected an index at {key:?} in {path:?}")))?;
                    items.get_mut(idx).ok_or_else(|| BenchError::Config(format!("index {idx} out of range in {path:?}")))?
                }
                _ => return Err(BenchError::Config(format!("cannot descend into {key:?} in {path:?}"))),
            };
        }
        *node = value;
        let config: Self = serde_json::from_value(tree).map_err(|e| BenchError::Config(format!("override {path}: {e}")))?;
        config.validate()?;
        Ok(config)
    }
}
