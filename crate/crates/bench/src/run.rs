//! Oracle setup, seeded multi-trial execution and aggregation.

use std::time::Instant;

use mixest_core::baselines::{fit_add_constant, fit_kde, fit_knn, log_spaced, symbol_counts, KdeModel, KnnModel};
use mixest_core::dictionary::GInfinity;
use mixest_core::estimators::{
    softmax_sgd_baseline, trace_estimator, EstimatorState, OutputMode, StepSchedule,
};
use mixest_core::evaluation::{
    default_nu_probes, estimate_nu_objective, fit_rate, kl_continuous, kl_on_grid, solve_objective, BestInClass,
    MixtureDensity, NuEstimate, Objective, Reference,
};
use mixest_core::grid::MidpointGrid;
use mixest_core::rng::{derive_seed, seeded};
use mixest_core::simplex::{kl_divergence, r_phi};
use mixest_core::targets::Target;
use mixest_core::{evaluation, Dictionary, MirrorKind, SamplePoint, WeightVector};
use rayon::prelude::*;

use crate::config::{BaselineSpec, DictionarySpec, EstimatorSpec, ExperimentConfig, Method, Metric, ScheduleSpec};
use crate::error::{BenchError, BenchResult};
use crate::record::{
    nums, BestInClassRecord, BoundCurve, ExperimentRecord, Heatmap, Hyperparameter, Num, NuRecord, OracleRecord,
    RateFitRecord, ResolutionCheck, Series, Timing, TrialInfo,
};

/// Largest reference design (samples × components) the oracles will build.
pub const MAX_REFERENCE_ENTRIES: usize = 400_000_000;

/// Label mixed into the base seed for the oracle reference sample.
const REFERENCE_SEED_LABEL: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

/// Runs `f` on a pool with the requested number of workers.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> BenchResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(BenchError::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| BenchError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Everything computed once per experiment, before any trial.
pub struct Setup {
    pub config: ExperimentConfig,
    pub target: Target,
    pub dictionary: Dictionary,
    pub checkpoints: Vec<u64>,
    pub baseline_checkpoints: Vec<u64>,
    pub objective: Option<Objective>,
    pub best: Option<BestInClass>,
    pub nu_estimate: Option<NuEstimate>,
    pub nu: Option<f64>,
    pub g_inf: GInfinity,
    pub g_inf_overridden: bool,
    pub schedules: Vec<StepSchedule>,
    /// Target density on the KL grid (continuous targets).
    pub kl_grid: Option<(MidpointGrid, Vec<f64>)>,
    pub reference_size: Option<usize>,
}

fn core(context: &str) -> impl Fn(mixest_core::Error) -> BenchError + '_ {
    move |e| BenchError::from_core(context, e)
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> BenchResult<Self> {
        config.validate()?;
        let target = config.target.build().map_err(core("target"))?;
        let dictionary = match &config.dictionary {
            DictionarySpec::MultiscaleGaussian { layers } => {
                let domain = target.domain().expect("validated: continuous target").clone();
                Dictionary::multiscale_gaussian(domain, layers)
            }
            DictionarySpec::Categorical { epsilon } => {
                Dictionary::categorical(target.alphabet().expect("validated: categorical target"), *epsilon)
            }
        }
        .map_err(core("dictionary"))?;

        let needs_nu = config.estimators.iter().any(|e| matches!(e.schedule, ScheduleSpec::StronglyConvex { nu: None }));
        let needs_objective = config.oracles.best_in_class || (config.oracles.nu && config.oracles.nu_override.is_none());
        let mut reference_size = None;
        let objective = if needs_objective {
            let obj = match target.pmf() {
                Some(pmf) => Objective::new(&dictionary, Reference::ExactPmf(pmf)),
                None => {
                    let size = config.oracles.reference_size;
                    if size.saturating_mul(dictionary.len()) > MAX_REFERENCE_ENTRIES {
                        return Err(BenchError::Config(format!(
                            "reference sample of {size} points times {} components is too large; \
                             lower oracles.reference_size or disable the oracles",
                            dictionary.len()
                        )));
                    }
                    reference_size = Some(size);
                    let mut rng = seeded(derive_seed(config.seed, REFERENCE_SEED_LABEL));
                    Objective::new(&dictionary, Reference::Samples(&target.sample(&mut rng, size)))
                }
            };
            Some(obj.map_err(core("oracles"))?)
        } else {
            None
        };

        let best = match (&objective, config.oracles.best_in_class) {
            (Some(obj), true) => Some(
                solve_objective(obj, config.oracles.tolerance, config.oracles.max_iterations)
                    .map_err(core("best-in-class solve"))?,
            ),
            _ => None,
        };
        let nu_estimate = match (&objective, config.oracles.nu && config.oracles.nu_override.is_none()) {
            (Some(obj), true) => {
                let probes = default_nu_probes(dictionary.len(), config.oracles.nu_probes, derive_seed(config.seed, 1))
                    .map_err(core("nu probes"))?;
                Some(estimate_nu_objective(obj, &probes).map_err(core("nu estimate"))?)
            }
            _ => None,
        };
        let nu = config.oracles.nu_override.or(nu_estimate.as_ref().map(|e| e.nu));
        if needs_nu && !nu.is_some_and(|v| v > 0.0) {
            return Err(BenchError::Config(
                "a strongly_convex schedule needs nu: enable oracles.nu or set oracles.nu_override".into(),
            ));
        }

        let mut g_inf = dictionary.estimate_g_infinity();
        let g_inf_overridden = config.oracles.g_inf_override.is_some();
        if let Some(g) = config.oracles.g_inf_override {
            g_inf = GInfinity { value: g, log_value: g.ln(), resolution: None };
        }

        let schedules = config
            .estimators
            .iter()
            .map(|e| resolve_schedule(e, config.n, dictionary.len(), nu, &g_inf))
            .collect::<BenchResult<Vec<_>>>()?;

        let kl_grid = match target.domain() {
            Some(domain) if config.metrics.contains(&Metric::KlVsTarget) => {
                let grid = MidpointGrid::new(domain.clone(), config.kl_resolution).map_err(core("KL grid"))?;
                let p = target.density_on_grid(&grid).map_err(core("target density"))?;
                Some((grid, p))
            }
            _ => None,
        };

        Ok(Self {
            checkpoints: config.checkpoint_list(),
            baseline_checkpoints: config.baseline_checkpoint_list(),
            config: config.clone(),
            target,
            dictionary,
            objective,
            best,
            nu_estimate,
            nu,
            g_inf,
            g_inf_overridden,
            schedules,
            kl_grid,
            reference_size,
        })
    }

    fn metric_for_weights(&self, metric: Metric, m: &WeightVector) -> BenchResult<f64> {
        let best = || self.best.as_ref().map(|b| &b.weights).expect("validated: best-in-class available");
        Ok(match metric {
            Metric::KlVsBestInClass => kl_divergence(best().as_slice(), m.as_slice()).map_err(core("metric"))?,
            Metric::L2VsBestInClass => best().squared_distance(m),
            Metric::SuboptimalityGap => {
                self.objective.as_ref().expect("objective built with m*").difference(best().as_slice(), m.as_slice())
            }
            Metric::KlVsTarget => match (self.target.pmf(), &self.kl_grid) {
                (Some(pmf), _) => {
                    let q = self.dictionary.mixture_pmf(m.as_slice()).map_err(core("mixture"))?;
                    kl_divergence(pmf, &q).map_err(core("metric"))?
                }
                (None, Some((grid, p))) => {
                    let q = self.dictionary.mixture_on_grid(m.as_slice(), grid).map_err(core("mixture"))?;
                    kl_on_grid(p, &q, grid.cell_volume()).map_err(core("metric"))?
                }
                (None, None) => unreachable!("KL grid is built whenever kl_vs_target is requested"),
            },
        })
    }
}

fn resolve_schedule(
    spec: &EstimatorSpec,
    n: u64,
    dim: usize,
    nu: Option<f64>,
    g_inf: &GInfinity,
) -> BenchResult<StepSchedule> {
    let ctx = format!("estimator {}", spec.name);
    let schedule = match spec.schedule {
        ScheduleSpec::ConstantSqrtN { horizon, r_phi: r, g_inf: g } => {
            let r = match r {
                Some(r) => r,
                None => r_phi(&spec.mirror, dim).map_err(core(&ctx))?,
            };
            let g = g.unwrap_or(g_inf.value);
            if !g.is_finite() {
                return Err(BenchError::Config(format!(
                    "{ctx}: G_inf overflows f64 (log G_inf = {:.1}); set schedule.g_inf or oracles.g_inf_override",
                    g_inf.log_value
                )));
            }
            StepSchedule::constant_sqrt_n(horizon.unwrap_or(n), r, g)
        }
        ScheduleSpec::StronglyConvex { nu: given } => {
            StepSchedule::strongly_convex(given.or(nu).expect("checked when resolving nu"))
        }
        ScheduleSpec::PowerDecay { gamma0, decay } => StepSchedule::power_decay(gamma0, decay),
    };
    schedule.map_err(core(&ctx))
}

/// FNV-1a over the bit patterns of a sample stream.
pub fn stream_checksum(stream: &[SamplePoint]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: [u8; 8]| {
        for b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for s in stream {
        match s {
            SamplePoint::Symbol(j) => feed((*j as u64).to_le_bytes()),
            SamplePoint::Continuous(c) => c.iter().for_each(|x| feed(x.to_bits().to_le_bytes())),
        }
    }
    format!("{hash:016x}")
}

enum Fitted {
    Kde(KdeModel),
    Knn(KnnModel),
    AddConstant(Vec<f64>),
}

struct TrialOutput {
    info: TrialInfo,
    /// `[estimator][metric][checkpoint]`.
    estimators: Vec<Vec<Vec<f64>>>,
    /// `[baseline][checkpoint]` of `kl_vs_target`.
    baselines: Vec<Vec<f64>>,
    final_weights: Vec<WeightVector>,
    final_baselines: Vec<Option<Fitted>>,
    hyperparameters: Vec<Hyperparameter>,
    seconds: Vec<f64>,
}

fn run_trial(setup: &Setup, index: usize) -> BenchResult<TrialOutput> {
    let config = &setup.config;
    let seed = derive_seed(config.seed, index as u64);
    let mut rng = seeded(seed);
    let stream = setup.target.sample(&mut rng, config.n as usize);
    let info = TrialInfo { index, seed, stream_length: stream.len(), stream_checksum: stream_checksum(&stream) };
    let dim = setup.dictionary.len();
    let mut estimators = Vec::new();
    let mut final_weights = Vec::new();
    let mut seconds = Vec::new();

    for (spec, schedule) in config.estimators.iter().zip(&setup.schedules) {
        let ctx = format!("estimator {} (trial {index})", spec.name);
        let start = Instant::now();
        let outputs: Vec<WeightVector> = match spec.method {
            Method::Smd => {
                let state = EstimatorState::new(WeightVector::uniform(dim).map_err(core(&ctx))?, *schedule, spec.mirror)
                    .map_err(core(&ctx))?
                    .with_sign(spec.sign);
                trace_estimator(&setup.dictionary, state, &stream, &setup.checkpoints)
                    .map_err(core(&ctx))?
                    .into_iter()
                    .map(|s| s.output(spec.output).clone())
                    .collect()
            }
            Method::SoftmaxSgd => {
                softmax_sgd_baseline(&setup.dictionary, *schedule, vec![0.0; dim], &stream, &setup.checkpoints)
                    .map_err(core(&ctx))?
            }
        };
        let per_metric = config
            .metrics
            .iter()
            .map(|&metric| outputs.iter().map(|m| setup.metric_for_weights(metric, m)).collect::<BenchResult<Vec<_>>>())
            .collect::<BenchResult<Vec<_>>>()?;
        seconds.push(start.elapsed().as_secs_f64());
        estimators.push(per_metric);
        if let Some(last) = outputs.last() {
            final_weights.push(last.clone());
        }
    }

    let mut baselines = Vec::new();
    let mut final_baselines = Vec::new();
    let mut hyperparameters = Vec::new();
    for spec in &config.baselines {
        let ctx = format!("baseline {} (trial {index})", spec.label());
        let start = Instant::now();
        let mut values = Vec::new();
        let mut last = None;
        for &c in &setup.baseline_checkpoints {
            let prefix = &stream[..c as usize];
            let fitted = fit_baseline(setup, spec, prefix, derive_seed(seed, c)).map_err(|e| match e {
                BenchError::Runtime(m) => BenchError::Runtime(format!("{ctx}: {m}")),
                other => other,
            })?;
            let (name, value) = match &fitted {
                Fitted::Kde(m) => ("bandwidth", m.bandwidth()),
                Fitted::Knn(m) => ("k", m.k() as f64),
                Fitted::AddConstant(_) => ("constant", match spec {
                    BaselineSpec::AddConstant { constant } => *constant,
                    _ => unreachable!(),
                }),
            };
            hyperparameters.push(Hyperparameter {
                estimator: spec.label().into(),
                trial: index,
                checkpoint: c,
                name: name.into(),
                value,
            });
            values.push(baseline_kl(setup, &fitted)?);
            last = Some(fitted);
        }
        seconds.push(start.elapsed().as_secs_f64());
        baselines.push(values);
        final_baselines.push(last);
    }
    Ok(TrialOutput { info, estimators, baselines, final_weights, final_baselines, hyperparameters, seconds })
}

fn fit_baseline(setup: &Setup, spec: &BaselineSpec, prefix: &[SamplePoint], seed: u64) -> BenchResult<Fitted> {
    let ctx = format!("baseline {}", spec.label());
    Ok(match spec {
        BaselineSpec::Kde { holdout_fraction, bandwidth_range, bandwidth_count } => {
            let grid = log_spaced(bandwidth_range[0], bandwidth_range[1], *bandwidth_count);
            Fitted::Kde(fit_kde(prefix, *holdout_fraction, &grid, seed).map_err(core(&ctx))?)
        }
        BaselineSpec::Knn { k, delta, resolution } => {
            let domain = setup.target.domain().expect("validated: continuous target");
            Fitted::Knn(fit_knn(prefix, *k, *delta, domain, *resolution).map_err(core(&ctx))?)
        }
        BaselineSpec::AddConstant { constant } => {
            let alphabet = setup.target.alphabet().expect("validated: categorical target");
            let counts = symbol_counts(prefix, alphabet).map_err(core(&ctx))?;
            Fitted::AddConstant(fit_add_constant(&counts, *constant).map_err(core(&ctx))?.pmf)
        }
    })
}

fn fitted_on_grid(fitted: &Fitted, grid: &MidpointGrid) -> BenchResult<Vec<f64>> {
    match fitted {
        Fitted::Kde(m) => m.density_on_grid(grid),
        Fitted::Knn(m) => m.density_on_grid(grid),
        Fitted::AddConstant(_) => unreachable!("categorical baselines have no grid"),
    }
    .map_err(core("baseline density"))
}

fn baseline_kl(setup: &Setup, fitted: &Fitted) -> BenchResult<f64> {
    match (fitted, setup.target.pmf(), &setup.kl_grid) {
        (Fitted::AddConstant(q), Some(p), _) => kl_divergence(p, q).map_err(core("baseline KL")),
        (_, None, Some((grid, p))) => {
            kl_on_grid(p, &fitted_on_grid(fitted, grid)?, grid.cell_volume()).map_err(core("baseline KL"))
        }
        _ => Ok(f64::NAN),
    }
}

/// Runs every trial of `config` and aggregates the results.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> BenchResult<ExperimentRecord> {
    with_jobs(options.jobs, || {
        let setup = Setup::new(config)?;
        run_prepared(&setup)
    })?
}

/// Runs the trials of an already prepared experiment on the current pool.
pub fn run_prepared(setup: &Setup) -> BenchResult<ExperimentRecord> {
    let config = &setup.config;
    let trials: Vec<TrialOutput> =
        (0..config.trials).into_par_iter().map(|t| run_trial(setup, t)).collect::<BenchResult<Vec<_>>>()?;

    let mut series = Vec::new();
    for (e, spec) in config.estimators.iter().enumerate() {
        for (k, &metric) in config.metrics.iter().enumerate() {
            let rows: Vec<Vec<f64>> = trials.iter().map(|t| t.estimators[e][k].clone()).collect();
            series.push(Series::new(spec.name.clone(), metric, setup.checkpoints.clone(), rows));
        }
    }
    for (b, spec) in config.baselines.iter().enumerate() {
        let rows: Vec<Vec<f64>> = trials.iter().map(|t| t.baselines[b].clone()).collect();
        series.push(Series::new(spec.label().into(), Metric::KlVsTarget, setup.baseline_checkpoints.clone(), rows));
    }

    let bounds = bound_curves(setup);
    let rate_fits = series.iter().map(rate_fit_record).collect();
    let (heatmaps, resolution_checks) = match trials.first() {
        Some(first) => diagnostics(setup, first)?,
        None => (Vec::new(), Vec::new()),
    };

    let names: Vec<String> = config
        .estimators
        .iter()
        .map(|e| e.name.clone())
        .chain(config.baselines.iter().map(|b| b.label().to_string()))
        .collect();
    let timings = names
        .into_iter()
        .enumerate()
        .map(|(i, estimator)| Timing { estimator, seconds: trials.iter().map(|t| t.seconds[i]).sum() })
        .collect();

    Ok(ExperimentRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        base_seed: config.seed,
        trials: trials.iter().map(|t| t.info.clone()).collect(),
        oracles: oracle_record(setup),
        series,
        bounds,
        rate_fits,
        heatmaps,
        resolution_checks,
        hyperparameters: trials.iter().flat_map(|t| t.hyperparameters.clone()).collect(),
        timings,
    })
}

fn oracle_record(setup: &Setup) -> OracleRecord {
    let dim = setup.dictionary.len();
    OracleRecord {
        dictionary_size: dim,
        reference_size: setup.reference_size,
        best_in_class: setup.best.as_ref().map(|b| BestInClassRecord {
            weights: b.weights.as_slice().to_vec(),
            objective: b.objective,
            iterations: b.iterations,
            gradient_mapping_norm: b.gradient_mapping_norm,
            converged: b.converged,
        }),
        nu: setup.nu.map(|value| NuRecord {
            value,
            overridden: setup.config.oracles.nu_override.is_some(),
            estimated: setup.nu_estimate.as_ref().map(|e| e.nu),
            per_probe: setup.nu_estimate.as_ref().map(|e| e.per_probe.clone()).unwrap_or_default(),
            degenerate: setup.nu_estimate.as_ref().is_some_and(|e| e.degenerate),
        }),
        g_infinity: Num(setup.g_inf.value),
        log_g_infinity: setup.g_inf.log_value,
        g_infinity_overridden: setup.g_inf_overridden,
        r_phi_euclidean: r_phi(&MirrorKind::Euclidean, dim).unwrap_or(f64::NAN),
        r_phi_entropy: r_phi(&MirrorKind::NegativeEntropy, dim).unwrap_or(f64::NAN),
    }
}

/// Theorem bounds for the estimators whose schedule matches a theorem's
/// hypotheses, on the metric the theorem controls.
fn bound_curves(setup: &Setup) -> Vec<BoundCurve> {
    let config = &setup.config;
    let (Some(best), g) = (&setup.best, setup.g_inf.value) else {
        return Vec::new();
    };
    if !g.is_finite() {
        return Vec::new();
    }
    let dim = setup.dictionary.len();
    let m0 = WeightVector::uniform(dim).expect("dictionary has at least two components");
    let mut out = Vec::new();
    for (spec, schedule) in config.estimators.iter().zip(&setup.schedules) {
        if spec.method != Method::Smd {
            continue;
        }
        let cps = setup.checkpoints.clone();
        let curve = |metric: Metric, bound: &str, f: &dyn Fn(u64) -> (f64, f64)| {
            let (values, statement): (Vec<f64>, Vec<f64>) = cps.iter().map(|&c| f(c)).unzip();
            BoundCurve {
                estimator: spec.name.clone(),
                metric,
                bound: bound.into(),
                checkpoints: cps.clone(),
                values: nums(&values),
                statement_values: nums(&statement),
            }
        };
        match (*schedule, spec.mirror, spec.output) {
            (StepSchedule::StronglyConvex { nu }, MirrorKind::Euclidean, OutputMode::LastIterate)
                if config.metrics.contains(&Metric::L2VsBestInClass) =>
            {
                let a0 = 0.5 * m0.squared_distance(&best.weights);
                let r_l2 = r_phi(&MirrorKind::Euclidean, dim).unwrap_or(f64::NAN);
                out.push(curve(Metric::L2VsBestInClass, "theorem1", &|c| {
                    (evaluation::bound_theorem1(a0, g, nu, c), evaluation::bound_theorem1_statement(r_l2, g, nu, c))
                }));
            }
            (StepSchedule::StronglyConvex { nu }, MirrorKind::NegativeEntropy, OutputMode::LastIterate)
                if config.metrics.contains(&Metric::KlVsBestInClass) =>
            {
                let kl0 = kl_divergence(best.weights.as_slice(), m0.as_slice()).unwrap_or(f64::NAN);
                let r_kl = r_phi(&MirrorKind::NegativeEntropy, dim).unwrap_or(f64::NAN);
                out.push(curve(Metric::KlVsBestInClass, "theorem2", &|c| {
                    (evaluation::bound_theorem2(kl0, g, nu, c), evaluation::bound_theorem2_statement(r_kl, g, nu, c))
                }));
            }
            (StepSchedule::ConstantSqrtN { horizon, r_phi: r, g_inf: g_step }, _, OutputMode::Cesaro)
                if config.metrics.contains(&Metric::SuboptimalityGap) && cps.contains(&horizon) =>
            {
                // The guarantee holds at the horizon the step was tuned for.
                let v = evaluation::bound_proposition1(r, g_step, horizon);
                out.push(BoundCurve {
                    estimator: spec.name.clone(),
                    metric: Metric::SuboptimalityGap,
                    bound: "proposition1".into(),
                    checkpoints: vec![horizon],
                    values: nums(&[v]),
                    statement_values: nums(&[v]),
                });
            }
            _ => {}
        }
    }
    out
}

fn rate_fit_record(series: &Series) -> RateFitRecord {
    let points: Vec<(f64, f64)> = series
        .checkpoints
        .iter()
        .zip(&series.mean)
        .filter(|(c, _)| **c > 0)
        .map(|(c, v)| (*c as f64, v.0))
        .collect();
    let base = RateFitRecord {
        estimator: series.estimator.clone(),
        metric: series.metric,
        slope: None,
        intercept: None,
        r_squared: None,
        note: None,
    };
    match fit_rate(&points) {
        Ok(fit) => RateFitRecord { slope: Some(fit.slope), intercept: Some(fit.intercept), r_squared: Some(fit.r_squared), ..base },
        Err(e) => RateFitRecord { note: Some(e.to_string()), ..base },
    }
}

/// Heatmaps and a resolution check from the first trial's final fits.
fn diagnostics(setup: &Setup, first: &TrialOutput) -> BenchResult<(Vec<Heatmap>, Vec<ResolutionCheck>)> {
    let config = &setup.config;
    let Some(domain) = setup.target.domain() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let mut heatmaps = Vec::new();
    if config.heatmap_resolution > 0 {
        let grid = MidpointGrid::new(domain.clone(), config.heatmap_resolution).map_err(core("heatmap grid"))?;
        let frame = |label: String, values: Vec<f64>| Heatmap {
            label,
            resolution: config.heatmap_resolution,
            lo: [domain.lo[0], domain.lo[1]],
            hi: [domain.hi[0], domain.hi[1]],
            values,
        };
        heatmaps.push(frame("target".into(), setup.target.density_on_grid(&grid).map_err(core("target density"))?));
        for (spec, m) in config.estimators.iter().zip(&first.final_weights) {
            let values = setup.dictionary.mixture_on_grid(m.as_slice(), &grid).map_err(core("mixture"))?;
            heatmaps.push(frame(spec.name.clone(), values));
        }
        for (spec, fitted) in config.baselines.iter().zip(&first.final_baselines) {
            if let Some(f) = fitted {
                heatmaps.push(frame(spec.label().into(), fitted_on_grid(f, &grid)?));
            }
        }
    }
    let mut checks = Vec::new();
    if let (Some((grid, _)), Some(&last)) = (&setup.kl_grid, setup.checkpoints.last()) {
        for (spec, m) in config.estimators.iter().zip(&first.final_weights) {
            let est = kl_continuous(&setup.target, &MixtureDensity { dictionary: &setup.dictionary, weights: m }, grid)
                .map_err(core("resolution check"))?;
            checks.push(ResolutionCheck {
                estimator: spec.name.clone(),
                checkpoint: last,
                resolution: est.resolution,
                value: Num(est.value),
                half_resolution_value: est.half_resolution.map(Num),
            });
        }
    }
    Ok((heatmaps, checks))
}
