//! Online estimators of the mixture weights.
//!
//! Each observation `ζ` yields the score vector `g = f(ζ)/Q(ζ)`, whose
//! negation is the stochastic gradient of `log 1/Q(ζ)`. A mirror-descent step
//! then moves the weights against the loss gradient:
//!
//! * Euclidean map: `m ← Π_Δ(m + γ g)` (projected SGD),
//! * entropy map: `m_j ← m_j e^{γ g_j} / Z` (exponentiated update).
//!
//! Both the running Cesàro average and the last iterate are tracked.

use serde::{Deserialize, Serialize};

use crate::dictionary::{score_from_values, Dictionary, SamplePoint};
use crate::error::{bail, Result};
use crate::simplex::{floor_in_place, project_simplex, MirrorKind, WeightVector, ENTROPY_FLOOR};

/// Step-size rule `γ_i`, indexed from `i = 0` for the first observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `γ_i = R_φ / (G_∞ √N)` for a known horizon `N`.
    ConstantSqrtN { horizon: u64, r_phi: f64, g_inf: f64 },
    /// `γ_i = 2 / (ν (i + 1))`.
    StronglyConvex { nu: f64 },
    /// `γ_t = γ_0 / (1 + t)^decay`.
    PowerDecay { gamma0: f64, decay: f64 },
}

impl StepSchedule {
    pub fn constant_sqrt_n(horizon: u64, r_phi: f64, g_inf: f64) -> Result<Self> {
        Self::ConstantSqrtN { horizon, r_phi, g_inf }.validated()
    }

    pub fn strongly_convex(nu: f64) -> Result<Self> {
        Self::StronglyConvex { nu }.validated()
    }

    pub fn power_decay(gamma0: f64, decay: f64) -> Result<Self> {
        Self::PowerDecay { gamma0, decay }.validated()
    }

    /// Checks the parameters and returns the schedule unchanged.
    pub fn validated(self) -> Result<Self> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                bail!(InvalidConfig, "step schedule parameter {name} must be positive and finite, got {v}");
            }
            Ok(())
        };
        match self {
            StepSchedule::ConstantSqrtN { horizon, r_phi, g_inf } => {
                if horizon == 0 {
                    bail!(InvalidConfig, "step schedule horizon must be positive");
                }
                positive("r_phi", r_phi)?;
                positive("g_inf", g_inf)?;
            }
            StepSchedule::StronglyConvex { nu } => positive("nu", nu)?,
            StepSchedule::PowerDecay { gamma0, decay } => {
                positive("gamma0", gamma0)?;
                if !(decay >= 0.0) || !decay.is_finite() {
                    bail!(InvalidConfig, "power decay exponent must be finite and nonnegative, got {decay}");
                }
            }
        }
        Ok(self)
    }

    /// The step used for observation `i` (zero-based).
    pub fn step(&self, i: u64) -> f64 {
        match *self {
            StepSchedule::ConstantSqrtN { horizon, r_phi, g_inf } => r_phi / (g_inf * (horizon as f64).sqrt()),
            StepSchedule::StronglyConvex { nu } => 2.0 / (nu * (i as f64 + 1.0)),
            StepSchedule::PowerDecay { gamma0, decay } => gamma0 / (1.0 + i as f64).powf(decay),
        }
    }
}

/// Which iterate an estimator reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Running arithmetic mean of the iterates.
    Cesaro,
    #[default]
    LastIterate,
}

/// Sign applied to the score vector in the Euclidean step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// Descent on the loss: `Π(m + γ g)`.
    #[default]
    Descent,
    /// The update written with a minus sign: `Π(m − γ g)`.
    Literal,
}

/// Projected stochastic gradient step.
pub fn sgd_step(m: &WeightVector, score: &[f64], gamma: f64, sign: SignConvention) -> Result<WeightVector> {
    if score.len() != m.len() {
        bail!(InvalidInput, "score has length {}, weights have {}", score.len(), m.len());
    }
    if score.iter().any(|g| !g.is_finite()) {
        bail!(InvalidInput, "score vector contains non-finite entries");
    }
    let direction = match sign {
        SignConvention::Descent => gamma,
        SignConvention::Literal => -gamma,
    };
    let moved: Vec<f64> = m.iter().zip(score).map(|(w, g)| w + direction * g).collect();
    project_simplex(&moved)
}

/// Exponentiated (entropic mirror) step `m_j e^{γ g_j} / Z`.
///
/// The weights are floored at [`ENTROPY_FLOOR`] before and after the update;
/// exponents are shifted by `max_k γ g_k` so nothing overflows.
pub fn exp_smd_step(m: &WeightVector, score: &[f64], gamma: f64) -> Result<WeightVector> {
    let mut w = m.as_slice().to_vec();
    exp_update_in_place(&mut w, score, gamma)?;
    Ok(WeightVector::from_raw(w))
}

fn exp_update_in_place(w: &mut [f64], score: &[f64], gamma: f64) -> Result<()> {
    if score.len() != w.len() {
        bail!(InvalidInput, "score has length {}, weights have {}", score.len(), w.len());
    }
    if score.iter().any(|g| !g.is_finite()) {
        bail!(InvalidInput, "score vector contains non-finite entries");
    }
    floor_in_place(w, ENTROPY_FLOOR);
    let top = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (x, g) in w.iter_mut().zip(score) {
        *x *= (gamma * (g - top)).exp();
        total += *x;
    }
    for x in w.iter_mut() {
        *x /= total;
    }
    floor_in_place(w, ENTROPY_FLOOR);
    Ok(())
}

/// Mutable state of one φ-SMD run.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    current: WeightVector,
    cesaro: WeightVector,
    step_count: u64,
    schedule: StepSchedule,
    mirror: MirrorKind,
    sign: SignConvention,
    values: Vec<f64>,
    score: Vec<f64>,
}

impl EstimatorState {
    pub fn new(m0: WeightVector, schedule: StepSchedule, mirror: MirrorKind) -> Result<Self> {
        let schedule = schedule.validated()?;
        let m0 = match mirror {
            MirrorKind::NegativeEntropy => m0.floored(ENTROPY_FLOOR),
            MirrorKind::Euclidean => m0,
        };
        let dim = m0.len();
        Ok(Self {
            cesaro: m0.clone(),
            current: m0,
            step_count: 0,
            schedule,
            mirror,
            sign: SignConvention::Descent,
            values: vec![0.0; dim],
            score: vec![0.0; dim],
        })
    }

    pub fn with_sign(mut self, sign: SignConvention) -> Self {
        self.sign = sign;
        self
    }

    pub fn current(&self) -> &WeightVector {
        &self.current
    }

    /// Mean of the iterates produced so far (`m⁰` before the first step).
    pub fn cesaro(&self) -> &WeightVector {
        &self.cesaro
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn mirror(&self) -> MirrorKind {
        self.mirror
    }

    pub fn output(&self, mode: OutputMode) -> &WeightVector {
        match mode {
            OutputMode::Cesaro => &self.cesaro,
            OutputMode::LastIterate => &self.current,
        }
    }

    /// Consumes one observation: one dictionary evaluation, one mirror step,
    /// one Cesàro update.
    pub fn step(&mut self, dict: &Dictionary, zeta: &SamplePoint) -> Result<()> {
        dict.score_into(self.current.as_slice(), zeta, &mut self.values, &mut self.score)?;
        let gamma = self.schedule.step(self.step_count);
        self.apply_score(gamma)
    }

    /// Step driven by an externally supplied score vector.
    pub fn step_with_score(&mut self, score: &[f64], gamma: f64) -> Result<()> {
        if score.len() != self.score.len() {
            bail!(InvalidInput, "score has length {}, weights have {}", score.len(), self.score.len());
        }
        self.score.copy_from_slice(score);
        self.apply_score(gamma)
    }

    fn apply_score(&mut self, gamma: f64) -> Result<()> {
        let next = match self.mirror {
            MirrorKind::Euclidean => sgd_step(&self.current, &self.score, gamma, self.sign)?,
            MirrorKind::NegativeEntropy => exp_smd_step(&self.current, &self.score, gamma)?,
        };
        self.current = next;
        self.step_count += 1;
        let i = self.step_count as f64;
        let mean: Vec<f64> = self
            .cesaro
            .iter()
            .zip(self.current.iter())
            .map(|(avg, m)| if self.step_count == 1 { *m } else { avg + (m - avg) / i })
            .collect();
        self.cesaro = WeightVector::from_raw(mean);
        Ok(())
    }
}

/// One mirror-descent step on a state: see [`EstimatorState::step`].
pub fn smd_step(state: &mut EstimatorState, dict: &Dictionary, zeta: &SamplePoint) -> Result<()> {
    state.step(dict, zeta)
}

/// Both outputs of an estimator after `step` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub last_iterate: WeightVector,
    pub cesaro: WeightVector,
}

impl Snapshot {
    pub fn output(&self, mode: OutputMode) -> &WeightVector {
        match mode {
            OutputMode::Cesaro => &self.cesaro,
            OutputMode::LastIterate => &self.last_iterate,
        }
    }
}

fn check_checkpoints(checkpoints: &[u64], available: usize) -> Result<()> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        bail!(InvalidConfig, "checkpoints must be strictly increasing");
    }
    if let Some(&last) = checkpoints.last() {
        if last as usize > available {
            bail!(InvalidConfig, "stream of {available} samples ends before checkpoint {last}");
        }
    }
    Ok(())
}

/// Runs φ-SMD over `stream`, snapshotting both outputs after each
/// checkpointed number of observations. Checkpoint 0 reports `m⁰`.
pub fn trace_estimator(
    dict: &Dictionary,
    state: EstimatorState,
    stream: &[SamplePoint],
    checkpoints: &[u64],
) -> Result<Vec<Snapshot>> {
    check_checkpoints(checkpoints, stream.len())?;
    let mut state = state;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let snap = |s: &EstimatorState| Snapshot {
        step: s.step_count,
        last_iterate: s.current.clone(),
        cesaro: s.cesaro.clone(),
    };
    while next.peek().is_some_and(|&&c| c == 0) {
        out.push(snap(&state));
        next.next();
    }
    for zeta in stream {
        if next.peek().is_none() {
            break;
        }
        state.step(dict, zeta)?;
        if next.peek().is_some_and(|&&c| c == state.step_count) {
            out.push(snap(&state));
            next.next();
        }
    }
    Ok(out)
}

/// Runs φ-SMD and returns the requested output at each checkpoint.
pub fn run_estimator(
    dict: &Dictionary,
    mirror: MirrorKind,
    schedule: StepSchedule,
    m0: WeightVector,
    stream: &[SamplePoint],
    checkpoints: &[u64],
    output_mode: OutputMode,
) -> Result<Vec<WeightVector>> {
    if m0.len() != dict.len() {
        bail!(InvalidInput, "initial weights have length {}, dictionary has {}", m0.len(), dict.len());
    }
    let state = EstimatorState::new(m0, schedule, mirror)?;
    Ok(trace_estimator(dict, state, stream, checkpoints)?
        .into_iter()
        .map(|s| match output_mode {
            OutputMode::Cesaro => s.cesaro,
            OutputMode::LastIterate => s.last_iterate,
        })
        .collect())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|w| (w - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Gradient of `log 1/Q(ζ)` with respect to the logits of `m = softmax(w)`:
/// `∂/∂w_j = m_j (1 − g_j)`.
pub fn softmax_loss_gradient(m: &[f64], score: &[f64]) -> Vec<f64> {
    m.iter().zip(score).map(|(p, g)| p * (1.0 - g)).collect()
}

/// Plain SGD on unconstrained logits with the simplex enforced by softmax.
#[derive(Debug, Clone)]
pub struct SoftmaxSgd {
    logits: Vec<f64>,
    weights: Vec<f64>,
    schedule: StepSchedule,
    step_count: u64,
    values: Vec<f64>,
    score: Vec<f64>,
}

impl SoftmaxSgd {
    pub fn new(w0: Vec<f64>, schedule: StepSchedule) -> Result<Self> {
        if w0.len() < 2 || w0.iter().any(|w| !w.is_finite()) {
            bail!(InvalidInput, "initial logits must be finite with at least 2 entries");
        }
        let weights = softmax(&w0);
        let dim = w0.len();
        Ok(Self {
            logits: w0,
            weights,
            schedule: schedule.validated()?,
            step_count: 0,
            values: vec![0.0; dim],
            score: vec![0.0; dim],
        })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn weights(&self) -> WeightVector {
        WeightVector::from_raw(self.weights.clone())
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(&mut self, dict: &Dictionary, zeta: &SamplePoint) -> Result<()> {
        dict.score_into(&self.weights, zeta, &mut self.values, &mut self.score)?;
        let gamma = self.schedule.step(self.step_count);
        self.apply(gamma);
        Ok(())
    }

    /// Step from raw component values `f(ζ)`.
    pub fn step_with_values(&mut self, values: &[f64], gamma: f64) -> Result<()> {
        score_from_values(&self.weights, values, &mut self.score)?;
        self.apply(gamma);
        Ok(())
    }

    fn apply(&mut self, gamma: f64) {
        for ((w, m), g) in self.logits.iter_mut().zip(&self.weights).zip(&self.score) {
            *w -= gamma * m * (1.0 - g);
        }
        self.weights = softmax(&self.logits);
        self.step_count += 1;
    }
}

/// Runs the softmax-parameterized SGD baseline with checkpointing.
pub fn softmax_sgd_baseline(
    dict: &Dictionary,
    schedule: StepSchedule,
    w0: Vec<f64>,
    stream: &[SamplePoint],
    checkpoints: &[u64],
) -> Result<Vec<WeightVector>> {
    if w0.len() != dict.len() {
        bail!(InvalidInput, "initial logits have length {}, dictionary has {}", w0.len(), dict.len());
    }
    check_checkpoints(checkpoints, stream.len())?;
    let mut est = SoftmaxSgd::new(w0, schedule)?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    while next.peek().is_some_and(|&&c| c == 0) {
        out.push(est.weights());
        next.next();
    }
    for zeta in stream {
        if next.peek().is_none() {
            break;
        }
        est.step(dict, zeta)?;
        if next.peek().is_some_and(|&&c| c == est.step_count) {
            out.push(est.weights());
            next.next();
        }
    }
    Ok(out)
}
