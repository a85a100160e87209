//! Oracles and metrics for judging the estimators: the best-in-class
//! weights, the strong-convexity constant, quadrature KL between continuous
//! densities, the convergence bounds and empirical rate fits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{KdeModel, KnnModel};
use crate::dictionary::{Dictionary, SamplePoint, MIXTURE_FLOOR};
use crate::error::{bail, Result};
use crate::grid::MidpointGrid;
use crate::rng;
use crate::simplex::{kl_divergence, WeightVector};
use crate::targets::Target;

/// Density cells below this value are skipped in the KL sum.
pub const KL_DENSITY_CUTOFF: f64 = 1e-12;

/// Minimum eigenvalue below which the dictionary is treated as degenerate.
pub const NU_DEGENERACY_THRESHOLD: f64 = 1e-10;

/// The distribution the population objective is averaged over.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    /// Equal-weight empirical distribution of a sample.
    Samples(&'a [SamplePoint]),
    /// Exact probabilities over a categorical alphabet.
    ExactPmf(&'a [f64]),
}

/// `L(m) = −Σ_x w_x log Σ_i m_i f_i(x)` over a weighted design.
#[derive(Debug, Clone)]
pub struct Objective {
    weights: DVector<f64>,
    /// `rows × dim` matrix of component values.
    values: DMatrix<f64>,
}

impl Objective {
    pub fn new(dict: &Dictionary, reference: Reference<'_>) -> Result<Self> {
        let dim = dict.len();
        let mut weights = Vec::new();
        let mut values = Vec::new();
        match reference {
            Reference::Samples(samples) => {
                if samples.is_empty() {
                    bail!(InvalidInput, "reference sample is empty");
                }
                let w = 1.0 / samples.len() as f64;
                values.reserve(samples.len() * dim);
                for s in samples {
                    values.extend(dict.component_values(s)?);
                    weights.push(w);
                }
            }
            Reference::ExactPmf(pmf) => {
                if dict.alphabet() != Some(pmf.len()) {
                    bail!(InvalidInput, "exact pmf needs a categorical dictionary over the same alphabet");
                }
                for (j, &p) in pmf.iter().enumerate() {
                    if p > 0.0 {
                        values.extend(dict.component_values(&SamplePoint::Symbol(j))?);
                        weights.push(p);
                    }
                }
            }
        }
        let rows = weights.len();
        Ok(Self { weights: DVector::from_vec(weights), values: DMatrix::from_row_slice(rows, dim, &values) })
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    fn mixtures(&self, m: &[f64]) -> DVector<f64> {
        (&self.values * DVector::from_column_slice(m)).map(|q| q.max(MIXTURE_FLOOR))
    }

    pub fn value(&self, m: &[f64]) -> f64 {
        -self.weights.iter().zip(self.mixtures(m).iter()).map(|(w, q)| w * q.ln()).sum::<f64>()
    }

    /// `L(b) − L(a)`, computed without cancelling two nearly equal sums.
    pub fn difference(&self, a: &[f64], b: &[f64]) -> f64 {
        self.difference_from(&self.mixtures(a), a, b)
    }

    fn difference_from(&self, q: &DVector<f64>, a: &[f64], b: &[f64]) -> f64 {
        let delta = DVector::from_iterator(a.len(), b.iter().zip(a).map(|(x, y)| x - y));
        let dq = &self.values * delta;
        -self
            .weights
            .iter()
            .zip(q.iter().zip(dq.iter()))
            .map(|(w, (q, d))| w * (d / q).max(-1.0 + 1e-16).ln_1p())
            .sum::<f64>()
    }

    /// `∇L(m) = −E[g]`.
    pub fn gradient(&self, m: &[f64]) -> Vec<f64> {
        self.gradient_from(&self.mixtures(m))
    }

    fn gradient_from(&self, q: &DVector<f64>) -> Vec<f64> {
        let ratio = self.weights.component_div(q);
        (-(self.values.tr_mul(&ratio))).iter().copied().collect()
    }

    /// `H(m) = E[g gᵀ]`, the Hessian of `L` at `m`.
    pub fn hessian(&self, m: &[f64]) -> DMatrix<f64> {
        let q = self.mixtures(m);
        let mut scaled = self.values.clone();
        for (mut row, (w, q)) in scaled.row_iter_mut().zip(self.weights.iter().zip(q.iter())) {
            row *= w.sqrt() / q;
        }
        scaled.tr_mul(&scaled)
    }
}

/// Minimizer of the population objective over the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestInClass {
    pub weights: WeightVector,
    pub objective: f64,
    pub iterations: usize,
    pub gradient_mapping_norm: f64,
    pub converged: bool,
}

pub const DEFAULT_SOLVER_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_SOLVER_ITERATIONS: usize = 100_000;

pub fn solve_best_in_class(dict: &Dictionary, reference: Reference<'_>, tolerance: f64) -> Result<BestInClass> {
    solve_objective(&Objective::new(dict, reference)?, tolerance, DEFAULT_SOLVER_ITERATIONS)
}

/// Full-gradient entropic mirror descent with backtracking, started from
/// the uniform vector. Stops once the unit-step gradient mapping
/// `‖m − T₁(m)‖₁` drops below `tolerance`, where `T₁` is the entropic step
/// of length one.
pub fn solve_objective(objective: &Objective, tolerance: f64, max_iterations: usize) -> Result<BestInClass> {
    let dim = objective.dim();
    let mut m = vec![1.0 / dim as f64; dim];
    let mut q = objective.mixtures(&m);
    let mut eta = 1.0;
    let mut norm;
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let grad = objective.gradient_from(&q);
        norm = entropic_step(&m, &grad, 1.0).iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if norm < tolerance {
            converged = true;
            break;
        }
        if iterations == max_iterations {
            break;
        }
        iterations += 1;
        let next = loop {
            let candidate = entropic_step(&m, &grad, eta);
            let decrease = objective.difference_from(&q, &m, &candidate);
            let linear: f64 = grad.iter().zip(candidate.iter().zip(&m)).map(|(g, (c, x))| g * (c - x)).sum();
            let bregman = kl_divergence(&candidate, &m)?;
            if decrease <= linear + bregman / eta + 1e-300 || eta < 1e-12 {
                break candidate;
            }
            eta *= 0.5;
        };
        m = next;
        q = objective.mixtures(&m);
        eta *= 2.0;
    }
    if !converged {
        log::warn!("best-in-class solver stopped after {iterations} iterations, gradient mapping {norm:e}");
    }
    let objective_value = objective.value(&m);
    Ok(BestInClass { weights: WeightVector::normalized(m)?, objective: objective_value, iterations, gradient_mapping_norm: norm, converged })
}

fn entropic_step(m: &[f64], grad: &[f64], eta: f64) -> Vec<f64> {
    let shift = grad.iter().copied().fold(f64::INFINITY, f64::min);
    let mut next: Vec<f64> = m.iter().zip(grad).map(|(x, g)| x * (-eta * (g - shift)).exp()).collect();
    let total: f64 = next.iter().sum();
    next.iter_mut().for_each(|x| *x /= total);
    next
}

/// Strong-convexity estimate and its spread over the probe points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuEstimate {
    /// Minimum of `λ_min(H(m))` over the probes.
    pub nu: f64,
    pub per_probe: Vec<f64>,
    /// `max / min` of the per-probe values.
    pub spread: f64,
    /// Set when some probe's minimum eigenvalue is at most `1e-10`.
    pub degenerate: bool,
}

/// Uniform weights plus `random` interior points drawn uniformly on the
/// simplex.
pub fn default_nu_probes(dim: usize, random: usize, seed: u64) -> Result<Vec<WeightVector>> {
    let mut probes = vec![WeightVector::uniform(dim)?];
    let mut rng = rng::seeded(seed);
    for _ in 0..random {
        let raw: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-9).collect();
        probes.push(WeightVector::normalized(raw)?);
    }
    Ok(probes)
}

pub fn estimate_nu(dict: &Dictionary, reference: Reference<'_>, probes: &[WeightVector]) -> Result<NuEstimate> {
    estimate_nu_objective(&Objective::new(dict, reference)?, probes)
}

/// `ν̂ = min over probes of λ_min(E[g gᵀ])`.
pub fn estimate_nu_objective(objective: &Objective, probes: &[WeightVector]) -> Result<NuEstimate> {
    if probes.is_empty() {
        bail!(InvalidInput, "at least one probe point is required");
    }
    let mut per_probe = Vec::with_capacity(probes.len());
    for m in probes {
        if m.len() != objective.dim() {
            bail!(InvalidInput, "probe has length {}, dictionary has {}", m.len(), objective.dim());
        }
        let eig = SymmetricEigen::new(objective.hessian(m.as_slice()));
        per_probe.push(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).max(0.0));
    }
    let nu = per_probe.iter().copied().fold(f64::INFINITY, f64::min);
    let top = per_probe.iter().copied().fold(0.0, f64::max);
    let degenerate = nu <= NU_DEGENERACY_THRESHOLD;
    if degenerate {
        log::warn!("minimum Hessian eigenvalue {nu:e}: dictionary components look linearly dependent");
    }
    Ok(NuEstimate { nu, per_probe, spread: if nu > 0.0 { top / nu } else { f64::INFINITY }, degenerate })
}

/// Anything that can be evaluated on every midpoint of a grid.
pub trait GridDensity {
    fn density_on_grid(&self, grid: &MidpointGrid) -> Result<Vec<f64>>;
}

impl GridDensity for Target {
    fn density_on_grid(&self, grid: &MidpointGrid) -> Result<Vec<f64>> {
        Target::density_on_grid(self, grid)
    }
}

impl GridDensity for KdeModel {
    fn density_on_grid(&self, grid: &MidpointGrid) -> Result<Vec<f64>> {
        KdeModel::density_on_grid(self, grid)
    }
}

impl GridDensity for KnnModel {
    fn density_on_grid(&self, grid: &MidpointGrid) -> Result<Vec<f64>> {
        KnnModel::density_on_grid(self, grid)
    }
}

/// The mixture `Σ m_i f_i` as a density.
#[derive(Debug, Clone, Copy)]
pub struct MixtureDensity<'a> {
    pub dictionary: &'a Dictionary,
    pub weights: &'a WeightVector,
}

impl GridDensity for MixtureDensity<'_> {
    fn density_on_grid(&self, grid: &MidpointGrid) -> Result<Vec<f64>> {
        self.dictionary.mixture_on_grid(self.weights.as_slice(), grid)
    }
}

/// A density given by a pointwise closure.
pub struct FnDensity<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> GridDensity for FnDensity<F> {
    fn density_on_grid(&self, grid: &MidpointGrid) -> Result<Vec<f64>> {
        Ok(grid.evaluate(&self.0))
    }
}

/// Quadrature KL with a half-resolution companion value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub value: f64,
    pub half_resolution: Option<f64>,
    pub resolution: usize,
}

/// Midpoint-rule `Σ p log(p/q) ΔA` over cells with `p > 1e-12`.
pub fn kl_on_grid(p: &[f64], q: &[f64], cell_volume: f64) -> Result<f64> {
    if p.len() != q.len() {
        bail!(InvalidInput, "density grids differ in size");
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi < 0.0 || qi < 0.0 || pi.is_nan() || qi.is_nan() {
            bail!(InvalidInput, "negative or NaN density value on the quadrature grid");
        }
        if pi > KL_DENSITY_CUTOFF {
            total += pi * (pi / qi.max(MIXTURE_FLOOR)).ln();
        }
    }
    Ok(total * cell_volume)
}

pub fn kl_continuous(p: &impl GridDensity, q: &impl GridDensity, grid: &MidpointGrid) -> Result<KlEstimate> {
    let value = kl_on_grid(&p.density_on_grid(grid)?, &q.density_on_grid(grid)?, grid.cell_volume())?;
    let half_resolution = if grid.resolution() >= 2 {
        let coarse = MidpointGrid::new(grid.domain().clone(), grid.resolution() / 2)?;
        Some(kl_on_grid(&p.density_on_grid(&coarse)?, &q.density_on_grid(&coarse)?, coarse.cell_volume())?)
    } else {
        None
    };
    Ok(KlEstimate { value, half_resolution, resolution: grid.resolution() })
}

/// `R_φ G_∞ / √N`.
pub fn bound_proposition1(r_phi: f64, g_inf: f64, n: u64) -> f64 {
    r_phi * g_inf / (n as f64).sqrt()
}

/// `max{2 a₀, 8 G_∞² / ν²} / (N + 1)` with `a₀ = ½‖m⁰ − m*‖²`.
pub fn bound_theorem1(a0: f64, g_inf: f64, nu: f64, n: u64) -> f64 {
    (2.0 * a0).max(8.0 * g_inf * g_inf / (nu * nu)) / (n as f64 + 1.0)
}

/// The same bound with the simplex diameter `R_ℓ2` in the first slot.
pub fn bound_theorem1_statement(r_l2: f64, g_inf: f64, nu: f64, n: u64) -> f64 {
    r_l2.max(8.0 * g_inf * g_inf / (nu * nu)) / (n as f64 + 1.0)
}

/// `max{KL(m*‖m⁰), 2 G_∞² / ν²} / (N + 1)`.
pub fn bound_theorem2(kl0: f64, g_inf: f64, nu: f64, n: u64) -> f64 {
    kl0.max(2.0 * g_inf * g_inf / (nu * nu)) / (n as f64 + 1.0)
}

/// The same bound with `R_KL = √log M` in the first slot.
pub fn bound_theorem2_statement(r_kl: f64, g_inf: f64, nu: f64, n: u64) -> f64 {
    r_kl.max(2.0 * g_inf * g_inf / (nu * nu)) / (n as f64 + 1.0)
}

/// Least-squares line through `(log N, log metric)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    /// Intercept in natural-log space.
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits the convergence exponent of `metric ≈ C N^slope`.
///
/// Points with a nonpositive metric are dropped with a warning. At least five
/// points spanning two decades of `N` must remain.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, v)| {
            let ok = *n > 0.0 && *v > 0.0 && v.is_finite();
            if !ok {
                log::warn!("rate fit: dropping point (N = {n}, metric = {v})");
            }
            ok
        })
        .map(|(n, v)| (n.ln(), v.ln()))
        .collect();
    if kept.len() < 5 {
        bail!(InvalidInput, "rate fit needs at least 5 positive points, got {}", kept.len());
    }
    let (lo, hi) = kept.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x)));
    if hi - lo < 100f64.ln() - 1e-12 {
        bail!(InvalidInput, "rate fit checkpoints span less than two decades");
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = kept.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = kept.iter().map(|(_, y)| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit { slope, intercept, r_squared, points: kept.len() })
}
