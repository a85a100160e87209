//! Classical batch estimators used for comparison: Gaussian KDE with a
//! cross-validated bandwidth, k-nearest-neighbour density, and add-a-constant
//! smoothing of symbol counts.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::SamplePoint;
use crate::error::{bail, Result};
use crate::grid::{BoxDomain, MidpointGrid};
use crate::rng;

/// `n` log-spaced values from `lo` to `hi`, both included.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    i if i == n - 1 => hi,
                    i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// The default 30-point bandwidth grid over `[0.01, 10]`.
pub fn default_bandwidths() -> Vec<f64> {
    log_spaced(0.01, 10.0, 30)
}

/// Points stored contiguously, `dim` coordinates each.
#[derive(Debug, Clone, PartialEq)]
struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    fn from_samples(samples: &[SamplePoint]) -> Result<Self> {
        let Some(first) = samples.first() else {
            bail!(InvalidInput, "no samples");
        };
        let Some(dim) = first.coords().map(<[f64]>::len) else {
            bail!(InvalidInput, "continuous baselines need continuous samples");
        };
        let mut coords = Vec::with_capacity(samples.len() * dim);
        for s in samples {
            match s.coords() {
                Some(c) if c.len() == dim => coords.extend_from_slice(c),
                _ => bail!(InvalidInput, "samples must all be continuous with dimension {dim}"),
            }
        }
        Ok(Self { dim, coords })
    }

    fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn squared_distances(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.coords.chunks_exact(self.dim).map(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()));
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            coords.extend_from_slice(self.point(i));
        }
        Self { dim: self.dim, coords }
    }
}

fn check_dim(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        bail!(InvalidInput, "point has dimension {}, model expects {dim}", x.len());
    }
    Ok(())
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + values.map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Gaussian kernel density estimate with a fixed bandwidth.
#[derive(Debug, Clone)]
pub struct KdeModel {
    points: PointSet,
    bandwidth: f64,
    /// Candidate bandwidths and their held-out mean log-likelihoods.
    pub cv_scores: Vec<(f64, f64)>,
}

impl KdeModel {
    pub fn new(samples: &[SamplePoint], bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            bail!(InvalidConfig, "KDE bandwidth must be positive, got {bandwidth}");
        }
        Ok(Self { points: PointSet::from_samples(samples)?, bandwidth, cv_scores: Vec::new() })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn norm(&self) -> f64 {
        (2.0 * std::f64::consts::PI * self.bandwidth * self.bandwidth).powf(-(self.points.dim as f64) / 2.0)
    }

    /// `(1/n) Σ_j (2πh²)^{−d/2} exp(−‖ζ − x_j‖² / (2h²))`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.points.dim)?;
        let two_var = 2.0 * self.bandwidth * self.bandwidth;
        let total: f64 = self
            .points
            .coords
            .chunks_exact(self.points.dim)
            .map(|p| (-p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / two_var).exp())
            .sum();
        Ok(self.norm() * total / self.len() as f64)
    }

    /// Density on every cell midpoint; separable kernels make this a
    /// product of two `resolution × n` matrices in 2-D.
    pub fn density_on_grid(&self, grid: &MidpointGrid) -> Result<Vec<f64>> {
        let dim = grid.domain().dim();
        if dim != self.points.dim {
            bail!(InvalidInput, "grid dimension does not match the KDE");
        }
        if dim != 2 {
            return Ok(grid.evaluate(|p| self.density(p).unwrap_or(0.0)));
        }
        let r = grid.resolution();
        let n = self.len();
        let two_var = 2.0 * self.bandwidth * self.bandwidth;
        let kernel = |axis: usize| {
            let mids = grid.axis(axis);
            DMatrix::from_fn(r, n, |a, j| {
                let d = mids[a] - self.points.point(j)[axis];
                (-d * d / two_var).exp()
            })
        };
        let prod = kernel(0) * kernel(1).transpose();
        let scale = self.norm() / n as f64;
        let mut out = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..r {
                out[a * r + b] = scale * prod[(a, b)];
            }
        }
        Ok(out)
    }
}

/// Fits a KDE by held-out likelihood over `bandwidths`.
///
/// The samples are shuffled with `seed` and split into training and holdout
/// parts; each candidate `h` is scored by the mean held-out log-likelihood
/// of the training-split KDE. The best `h` (ties toward the smaller one) is
/// refitted on all samples.
pub fn fit_kde(samples: &[SamplePoint], holdout_fraction: f64, bandwidths: &[f64], seed: u64) -> Result<KdeModel> {
    if samples.len() < 10 {
        bail!(InvalidInput, "KDE cross-validation needs at least 10 samples, got {}", samples.len());
    }
    if bandwidths.is_empty() || bandwidths.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        bail!(InvalidConfig, "bandwidth grid must be nonempty and positive");
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        bail!(InvalidConfig, "holdout fraction must lie in (0, 1), got {holdout_fraction}");
    }
    let all = PointSet::from_samples(samples)?;
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    let n_hold = ((all.len() as f64 * holdout_fraction).round() as usize).clamp(1, all.len() - 1);
    let holdout = all.subset(&order[..n_hold]);
    let train = all.subset(&order[n_hold..]);

    let scores = cv_scores(&train, &holdout, bandwidths);
    let mut best: Option<(f64, f64)> = None;
    for (&h, &s) in bandwidths.iter().zip(&scores) {
        if s.is_finite() && best.is_none_or(|(bh, bs)| s > bs || (s == bs && h < bh)) {
            best = Some((h, s));
        }
    }
    let Some((h, _)) = best else {
        bail!(DegenerateFit, "every candidate bandwidth gave a non-finite held-out likelihood");
    };
    Ok(KdeModel { points: all, bandwidth: h, cv_scores: bandwidths.iter().copied().zip(scores).collect() })
}

/// Mean held-out log-likelihood of the training-set KDE for each bandwidth.
fn cv_scores(train: &PointSet, holdout: &PointSet, bandwidths: &[f64]) -> Vec<f64> {
    let dim = train.dim as f64;
    let log_n = (train.len() as f64).ln();
    let per_point: Vec<Vec<f64>> = (0..holdout.len())
        .into_par_iter()
        .map_init(Vec::new, |dist, i| {
            train.squared_distances(holdout.point(i), dist);
            bandwidths
                .iter()
                .map(|&h| {
                    let two_var = 2.0 * h * h;
                    let log_norm = -0.5 * dim * (2.0 * std::f64::consts::PI * h * h).ln();
                    log_sum_exp(dist.iter().map(|d| -d / two_var)) + log_norm - log_n
                })
                .collect()
        })
        .collect();
    (0..bandwidths.len())
        .map(|b| per_point.iter().map(|row| row[b]).sum::<f64>() / holdout.len() as f64)
        .collect()
}

/// k-nearest-neighbour density `∝ 1 / (π (r_k(ζ)² + δ))`, normalized over
/// a domain box by midpoint quadrature.
#[derive(Debug, Clone)]
pub struct KnnModel {
    points: PointSet,
    k: usize,
    delta: f64,
    grid: MidpointGrid,
    grid_scores: Vec<f64>,
    normalizer: f64,
}

/// Default neighbour count `⌈√n⌉`.
pub fn default_k(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(1)
}

pub const DEFAULT_KNN_DELTA: f64 = 1e-6;

pub fn fit_knn(
    samples: &[SamplePoint],
    k: Option<usize>,
    delta: f64,
    domain: &BoxDomain,
    resolution: usize,
) -> Result<KnnModel> {
    let points = PointSet::from_samples(samples)?;
    let k = k.unwrap_or_else(|| default_k(points.len()));
    if k == 0 {
        bail!(InvalidConfig, "k must be at least 1");
    }
    if points.len() < k {
        bail!(InvalidState, "k-NN with k = {k} needs at least {k} points, got {}", points.len());
    }
    if !(delta > 0.0) || !delta.is_finite() {
        bail!(InvalidConfig, "k-NN stabilizer delta must be positive, got {delta}");
    }
    if domain.dim() != points.dim {
        bail!(InvalidInput, "domain dimension does not match the samples");
    }
    let grid = MidpointGrid::new(domain.clone(), resolution)?;
    let mut model = KnnModel { points, k, delta, grid: grid.clone(), grid_scores: Vec::new(), normalizer: 1.0 };
    model.grid_scores = model.scores_on(&grid);
    model.normalizer = grid.integrate(&model.grid_scores);
    Ok(model)
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Distance from `x` to its k-th nearest stored point.
    pub fn kth_distance(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.points.dim)?;
        let mut buf = Vec::with_capacity(self.points.len());
        Ok(self.kth_sq(x, &mut buf).sqrt())
    }

    fn kth_sq(&self, x: &[f64], buf: &mut Vec<f64>) -> f64 {
        self.points.squared_distances(x, buf);
        let (_, kth, _) = buf.select_nth_unstable_by(self.k - 1, f64::total_cmp);
        *kth
    }

    /// Unnormalized score `1 / (π (r_k² + δ))`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.points.dim)?;
        let mut buf = Vec::with_capacity(self.points.len());
        Ok(knn_score(self.kth_sq(x, &mut buf), self.delta))
    }

    /// Score divided by its quadrature mass over the domain box.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.score(x)? / self.normalizer)
    }

    fn scores_on(&self, grid: &MidpointGrid) -> Vec<f64> {
        (0..grid.len())
            .into_par_iter()
            .map_init(Vec::new, |buf, i| knn_score(self.kth_sq(&grid.point(i), buf), self.delta))
            .collect()
    }

    pub fn density_on_grid(&self, grid: &MidpointGrid) -> Result<Vec<f64>> {
        if grid.domain().dim() != self.points.dim {
            bail!(InvalidInput, "grid dimension does not match the k-NN model");
        }
        let scores = if *grid == self.grid { self.grid_scores.clone() } else { self.scores_on(grid) };
        Ok(scores.into_iter().map(|s| s / self.normalizer).collect())
    }
}

/// `1 / (π (r² + δ))` from the squared k-th neighbour distance.
pub fn knn_score(kth_squared_distance: f64, delta: f64) -> f64 {
    1.0 / (std::f64::consts::PI * (kth_squared_distance + delta))
}

/// Smoothed empirical pmf `(count_j + c) / (n + cK)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddConstantModel {
    pub constant: f64,
    pub pmf: Vec<f64>,
}

pub fn fit_add_constant(counts: &[u64], constant: f64) -> Result<AddConstantModel> {
    if counts.len() < 2 {
        bail!(InvalidConfig, "add-a-constant needs an alphabet of at least 2 symbols");
    }
    if !(constant >= 0.0) || !constant.is_finite() {
        bail!(InvalidConfig, "additive constant must be finite and nonnegative, got {constant}");
    }
    if constant == 0.0 && counts.contains(&0) {
        bail!(InvalidConfig, "constant 0 requires every symbol to be observed");
    }
    let n: u64 = counts.iter().sum();
    let denom = n as f64 + constant * counts.len() as f64;
    if denom <= 0.0 {
        bail!(InvalidConfig, "no observations and no additive constant");
    }
    let pmf = counts.iter().map(|&c| (c as f64 + constant) / denom).collect();
    Ok(AddConstantModel { constant, pmf })
}

/// Symbol counts of a categorical stream prefix.
pub fn symbol_counts(samples: &[SamplePoint], alphabet: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; alphabet];
    for s in samples {
        match s.symbol() {
            Some(j) if j < alphabet => counts[j] += 1,
            _ => bail!(InvalidInput, "sample {s:?} is not a symbol of an alphabet of size {alphabet}"),
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Kde,
    Knn,
    AddConstant,
}

/// Any fitted comparison estimator.
#[derive(Debug, Clone)]
pub enum BaselineModel {
    Kde(KdeModel),
    Knn(KnnModel),
    AddConstant(AddConstantModel),
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineModel::Kde(_) => BaselineKind::Kde,
            BaselineModel::Knn(_) => BaselineKind::Knn,
            BaselineModel::AddConstant(_) => BaselineKind::AddConstant,
        }
    }

    /// Density (or probability) at a sample point.
    pub fn density(&self, zeta: &SamplePoint) -> Result<f64> {
        match (self, zeta) {
            (BaselineModel::Kde(m), SamplePoint::Continuous(x)) => m.density(x),
            (BaselineModel::Knn(m), SamplePoint::Continuous(x)) => m.density(x),
            (BaselineModel::AddConstant(m), SamplePoint::Symbol(s)) => match m.pmf.get(*s) {
                Some(p) => Ok(*p),
                None => bail!(InvalidInput, "symbol {s} outside the alphabet"),
            },
            _ => bail!(InvalidInput, "sample kind does not match the baseline"),
        }
    }
}
