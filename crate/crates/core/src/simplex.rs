//! Geometry of the probability simplex: weight vectors, Euclidean projection,
//! mirror maps and their Bregman divergences.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// Absolute tolerance on `Σ m_i = 1` accepted by [`WeightVector::new`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Floor applied to weights before any log or ratio under the entropy map.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// A point of the probability simplex `Δ_M` with `M ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            bail!(InvalidInput, "weight vector needs at least 2 entries, got {}", weights.len());
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            bail!(InvalidInput, "weight {i} = {w} is not a finite nonnegative number");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            bail!(InvalidInput, "weights sum to {total}, expected 1");
        }
        Ok(Self(weights))
    }

    /// The barycenter `(1/M, …, 1/M)`.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim < 2 {
            bail!(InvalidInput, "simplex dimension must be at least 2, got {dim}");
        }
        Ok(Self(vec![1.0 / dim as f64; dim]))
    }

    /// The vertex `e_j`.
    pub fn vertex(dim: usize, j: usize) -> Result<Self> {
        if dim < 2 || j >= dim {
            bail!(InvalidInput, "vertex {j} does not exist in a simplex of dimension {dim}");
        }
        let mut w = vec![0.0; dim];
        w[j] = 1.0;
        Ok(Self(w))
    }

    /// Rescales a nonnegative vector with positive mass onto the simplex.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            bail!(InvalidInput, "cannot normalize a vector with negative or non-finite entries");
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            bail!(InvalidInput, "cannot normalize a vector with total mass {total}");
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights)
    }

    /// Internal constructor for vectors already known to be on the simplex.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        debug_assert!(weights.len() >= 2);
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        Self(weights)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Returns a copy with every entry at least `floor`, still summing to one.
    ///
    /// Floored entries are pinned at exactly `floor`; the remaining entries
    /// are rescaled to carry the rest of the mass.
    pub fn floored(&self, floor: f64) -> WeightVector {
        let mut w = self.0.clone();
        floor_in_place(&mut w, floor);
        Self(w)
    }

    /// Squared Euclidean distance `‖self − other‖₂²`.
    pub fn squared_distance(&self, other: &WeightVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn l1_distance(&self, other: &WeightVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(value: WeightVector) -> Self {
        value.0
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Floors a probability vector at `floor` and renormalizes so that every
/// entry is `≥ floor` and the total is one.
pub(crate) fn floor_in_place(w: &mut [f64], floor: f64) {
    let n = w.len();
    if floor <= 0.0 || floor * n as f64 >= 1.0 {
        return;
    }
    let mut pinned = vec![false; n];
    loop {
        let mut pinned_count = 0usize;
        let mut free_mass = 0.0;
        for (x, p) in w.iter_mut().zip(pinned.iter_mut()) {
            if *p || *x < floor {
                *p = true;
                *x = floor;
                pinned_count += 1;
            } else {
                free_mass += *x;
            }
        }
        let target = 1.0 - floor * pinned_count as f64;
        if free_mass <= 0.0 {
            return;
        }
        let scale = target / free_mass;
        let mut again = false;
        for (x, p) in w.iter_mut().zip(&pinned) {
            if !*p {
                *x *= scale;
                if *x < floor {
                    again = true;
                }
            }
        }
        if !again {
            return;
        }
    }
}

/// Euclidean projection onto the simplex (sort-and-threshold).
///
/// Inputs that already lie on the simplex to within `1e-12` are returned
/// unchanged, which makes the projection exactly idempotent.
pub fn project_simplex(v: &[f64]) -> Result<WeightVector> {
    if v.len() < 2 {
        bail!(InvalidInput, "projection needs at least 2 entries, got {}", v.len());
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        bail!(InvalidInput, "entry {i} of the projected vector is not finite");
    }
    let total: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (total - 1.0).abs() <= 1e-12 {
        return Ok(WeightVector(v.to_vec()));
    }

    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    let projected = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    Ok(WeightVector(projected))
}

/// `KL(p‖q) = Σ p_i log(p_i / q_i)` with `0 log 0 = 0`.
///
/// Returns `f64::INFINITY` when `p_i > 0` where `q_i = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        bail!(InvalidInput, "KL between vectors of length {} and {}", p.len(), q.len());
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += pi * (pi / qi).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Which distance-generating function drives a mirror-descent step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorKind {
    /// `φ(x) = ½‖x‖²`, giving projected SGD.
    Euclidean,
    /// `φ(x) = Σ x_i log x_i`, giving the exponentiated update.
    NegativeEntropy,
}

/// A distance-generating function on the simplex.
pub trait MirrorMap {
    fn phi(&self, x: &[f64]) -> Result<f64>;

    fn grad_phi(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `D_φ(x, y) = φ(x) − φ(y) − ⟨∇φ(y), x − y⟩`, clamped at zero.
    fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            bail!(InvalidInput, "Bregman divergence between lengths {} and {}", x.len(), y.len());
        }
        let grad = self.grad_phi(y)?;
        let inner: f64 = grad.iter().zip(x.iter().zip(y)).map(|(g, (a, b))| g * (a - b)).sum();
        Ok((self.phi(x)? - self.phi(y)? - inner).max(0.0))
    }

    /// `R_φ(Δ_M) = [max φ − min φ]^{1/2}` over the simplex.
    fn r_phi(&self, dim: usize) -> Result<f64>;
}

impl MirrorMap for MirrorKind {
    fn phi(&self, x: &[f64]) -> Result<f64> {
        match self {
            MirrorKind::Euclidean => Ok(0.5 * x.iter().map(|v| v * v).sum::<f64>()),
            MirrorKind::NegativeEntropy => {
                if x.iter().any(|&v| v < 0.0) {
                    bail!(Domain, "negative entropy is undefined for negative entries");
                }
                Ok(x.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum())
            }
        }
    }

    fn grad_phi(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            MirrorKind::Euclidean => Ok(x.to_vec()),
            MirrorKind::NegativeEntropy => {
                if let Some(i) = x.iter().position(|&v| v <= 0.0) {
                    bail!(Domain, "entropy gradient needs a strictly positive point, entry {i} is {}", x[i]);
                }
                Ok(x.iter().map(|v| v.ln() + 1.0).collect())
            }
        }
    }

    fn r_phi(&self, dim: usize) -> Result<f64> {
        if dim < 2 {
            bail!(InvalidInput, "R_phi needs a simplex of dimension at least 2, got {dim}");
        }
        let m = dim as f64;
        Ok(match self {
            // max ½ at a vertex, min 1/(2M) at the barycenter
            MirrorKind::Euclidean => ((m - 1.0) / (2.0 * m)).sqrt(),
            // max 0 at a vertex, min −log M at the barycenter
            MirrorKind::NegativeEntropy => m.ln().sqrt(),
        })
    }
}

/// Bregman divergence of `map` between two simplex points.
pub fn bregman_divergence(map: &impl MirrorMap, x: &WeightVector, y: &WeightVector) -> Result<f64> {
    map.bregman(x.as_slice(), y.as_slice())
}

/// `R_φ(Δ_M)` for the given map.
pub fn r_phi(map: &impl MirrorMap, dim: usize) -> Result<f64> {
    map.r_phi(dim)
}
