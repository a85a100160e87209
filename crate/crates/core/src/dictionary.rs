//! Fixed dictionaries of component densities `{f_i}` and the mixture
//! `Q(ζ) = Σ m_i f_i(ζ)` they span.
//!
//! Two families ship: multi-scale grids of isotropic Gaussians over a domain
//! box, and smoothed point masses over a finite alphabet. The score vector
//! `g_i = f_i(ζ) / Q(ζ)` is the negated stochastic gradient of the
//! cross-entropy loss `log 1/Q(ζ)` with respect to the weights.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::grid::{BoxDomain, MidpointGrid};
use crate::simplex::WeightVector;

/// Lower bound applied to `Q(ζ)` before it is used as a divisor.
pub const MIXTURE_FLOOR: f64 = 1e-300;

/// Relative tolerance on the mass of every interior Gaussian component.
pub const COMPONENT_MASS_TOLERANCE: f64 = 1e-3;

/// An observation: a point of the domain box or a symbol of the alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplePoint {
    Continuous(Vec<f64>),
    Symbol(usize),
}

impl SamplePoint {
    pub fn xy(x: f64, y: f64) -> Self {
        SamplePoint::Continuous(vec![x, y])
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            SamplePoint::Continuous(c) => Some(c),
            SamplePoint::Symbol(_) => None,
        }
    }

    pub fn symbol(&self) -> Option<usize> {
        match self {
            SamplePoint::Symbol(s) => Some(*s),
            SamplePoint::Continuous(_) => None,
        }
    }
}

/// One resolution level of a Gaussian grid dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayer {
    pub grid_side: usize,
    pub sigma: f64,
}

/// The three-layer dictionary of the four-mode experiment.
pub fn default_layers() -> Vec<GridLayer> {
    vec![
        GridLayer { grid_side: 8, sigma: 1.5 },
        GridLayer { grid_side: 15, sigma: 0.5 },
        GridLayer { grid_side: 30, sigma: 0.15 },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryKind {
    GaussianGrid,
    Categorical,
}

/// Center and scale of one Gaussian component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub center: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
struct Layer {
    side: usize,
    sigma: f64,
    /// `1 / (2πσ²)^{d/2}`.
    norm: f64,
    /// Center coordinates along each axis.
    axis_centers: Vec<Vec<f64>>,
    offset: usize,
}

impl Layer {
    fn len(&self, dim: usize) -> usize {
        self.side.pow(dim as u32)
    }

    fn center(&self, local: usize) -> Vec<f64> {
        match self.axis_centers.len() {
            1 => vec![self.axis_centers[0][local]],
            _ => vec![self.axis_centers[0][local / self.side], self.axis_centers[1][local % self.side]],
        }
    }
}

#[derive(Debug, Clone)]
struct GaussianGrid {
    domain: BoxDomain,
    layers: Vec<Layer>,
    len: usize,
    masses: Vec<f64>,
    edge: Vec<bool>,
}

#[derive(Debug, Clone)]
struct CategoricalBasis {
    alphabet: usize,
    epsilon: f64,
}

impl CategoricalBasis {
    fn on_symbol(&self) -> f64 {
        (1.0 - self.epsilon) + self.epsilon / self.alphabet as f64
    }

    fn off_symbol(&self) -> f64 {
        self.epsilon / self.alphabet as f64
    }
}

#[derive(Debug, Clone)]
enum Family {
    Gaussian(GaussianGrid),
    Categorical(CategoricalBasis),
}

/// An immutable, indexed family of `M ≥ 2` component densities.
#[derive(Debug, Clone)]
pub struct Dictionary {
    family: Family,
}

/// Component values `f_i(ζ)` and the mixture value at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEvaluation {
    pub values: Vec<f64>,
    pub mixture: f64,
}

/// Estimate of the component-ratio bound `G_∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GInfinity {
    /// `G_∞` itself; `+∞` when the ratio overflows `f64`.
    pub value: f64,
    /// Natural log of `G_∞`, always finite for a valid dictionary.
    pub log_value: f64,
    /// Evaluation nodes per axis, `None` for closed-form results.
    pub resolution: Option<usize>,
}

fn evenly_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * step }).collect()
}

/// Midpoint-rule mass of a unit 1-D Gaussian restricted to `[lo, hi]`.
fn axis_mass(center: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let cells = ((hi - lo) / (sigma / 8.0)).ceil().max(400.0) as usize;
    let h = (hi - lo) / cells as f64;
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    (0..cells)
        .map(|i| {
            let x = lo + (i as f64 + 0.5) * h;
            let z = (x - center) / sigma;
            (-0.5 * z * z).exp()
        })
        .sum::<f64>()
        * h
        * norm
}

impl Dictionary {
    /// One isotropic Gaussian per node of an evenly spaced grid (edges
    /// included) per layer, over a 1- or 2-D box.
    pub fn multiscale_gaussian(domain: BoxDomain, layers: &[GridLayer]) -> Result<Self> {
        if layers.is_empty() {
            bail!(InvalidConfig, "a Gaussian dictionary needs at least one layer");
        }
        let dim = domain.dim();
        let mut built = Vec::with_capacity(layers.len());
        let mut offset = 0;
        for (l, layer) in layers.iter().enumerate() {
            if layer.grid_side == 0 {
                bail!(InvalidConfig, "layer {l}: grid side must be at least 1");
            }
            if !(layer.sigma > 0.0) || !layer.sigma.is_finite() {
                bail!(InvalidConfig, "layer {l}: sigma must be positive, got {}", layer.sigma);
            }
            let axis_centers: Vec<Vec<f64>> =
                (0..dim).map(|a| evenly_spaced(domain.lo[a], domain.hi[a], layer.grid_side)).collect();
            let norm = (2.0 * std::f64::consts::PI * layer.sigma * layer.sigma).powf(-(dim as f64) / 2.0);
            let built_layer = Layer { side: layer.grid_side, sigma: layer.sigma, norm, axis_centers, offset };
            offset += built_layer.len(dim);
            built.push(built_layer);
        }
        if offset < 2 {
            bail!(InvalidConfig, "dictionary must have at least 2 components, got {offset}");
        }

        let mut masses = Vec::with_capacity(offset);
        let mut edge = Vec::with_capacity(offset);
        for layer in &built {
            for local in 0..layer.len(dim) {
                let center = layer.center(local);
                let mass: f64 = (0..dim)
                    .map(|a| axis_mass(center[a], layer.sigma, domain.lo[a], domain.hi[a]))
                    .product();
                let inside = (0..dim).all(|a| {
                    center[a] - 4.0 * layer.sigma >= domain.lo[a] && center[a] + 4.0 * layer.sigma <= domain.hi[a]
                });
                if inside && (mass - 1.0).abs() > COMPONENT_MASS_TOLERANCE {
                    bail!(
                        Numeric,
                        "component {} integrates to {mass} over the domain",
                        layer.offset + local
                    );
                }
                masses.push(mass);
                edge.push(!inside);
            }
        }
        Ok(Self { family: Family::Gaussian(GaussianGrid { domain, layers: built, len: offset, masses, edge }) })
    }

    /// `K` smoothed point masses: `f_i(j) = (1 − ε)·1{i = j} + ε/K`.
    pub fn categorical(alphabet: usize, epsilon: f64) -> Result<Self> {
        if alphabet < 2 {
            bail!(InvalidConfig, "categorical dictionary needs K >= 2, got {alphabet}");
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            bail!(InvalidConfig, "smoothing epsilon must lie in (0, 1), got {epsilon}");
        }
        Ok(Self { family: Family::Categorical(CategoricalBasis { alphabet, epsilon }) })
    }

    /// Number of components `M`.
    pub fn len(&self) -> usize {
        match &self.family {
            Family::Gaussian(g) => g.len,
            Family::Categorical(c) => c.alphabet,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> DictionaryKind {
        match self.family {
            Family::Gaussian(_) => DictionaryKind::GaussianGrid,
            Family::Categorical(_) => DictionaryKind::Categorical,
        }
    }

    /// Domain box of a Gaussian dictionary.
    pub fn domain(&self) -> Option<&BoxDomain> {
        match &self.family {
            Family::Gaussian(g) => Some(&g.domain),
            Family::Categorical(_) => None,
        }
    }

    /// Alphabet size of a categorical dictionary.
    pub fn alphabet(&self) -> Option<usize> {
        match &self.family {
            Family::Categorical(c) => Some(c.alphabet),
            Family::Gaussian(_) => None,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match &self.family {
            Family::Categorical(c) => Some(c.epsilon),
            Family::Gaussian(_) => None,
        }
    }

    /// Center and scale of Gaussian component `i`.
    pub fn component(&self, i: usize) -> Option<Component> {
        let Family::Gaussian(g) = &self.family else { return None };
        let dim = g.domain.dim();
        g.layers
            .iter()
            .find(|l| i >= l.offset && i < l.offset + l.len(dim))
            .map(|l| Component { center: l.center(i - l.offset), sigma: l.sigma })
    }

    /// Quadrature mass of each Gaussian component over the domain box.
    pub fn component_masses(&self) -> Option<&[f64]> {
        match &self.family {
            Family::Gaussian(g) => Some(&g.masses),
            Family::Categorical(_) => None,
        }
    }

    /// Components whose ±4σ ball leaves the domain box; their mass may fall
    /// short of one.
    pub fn edge_components(&self) -> Vec<usize> {
        match &self.family {
            Family::Gaussian(g) => g.edge.iter().enumerate().filter(|(_, e)| **e).map(|(i, _)| i).collect(),
            Family::Categorical(_) => Vec::new(),
        }
    }

    /// Checks that `zeta` has the right kind, dimension and range.
    pub fn check_point(&self, zeta: &SamplePoint) -> Result<()> {
        match (&self.family, zeta) {
            (Family::Gaussian(g), SamplePoint::Continuous(x)) => {
                if x.len() != g.domain.dim() {
                    bail!(InvalidInput, "sample has dimension {}, dictionary expects {}", x.len(), g.domain.dim());
                }
                if !g.domain.contains(x) {
                    bail!(InvalidInput, "sample {x:?} lies outside the dictionary domain");
                }
                Ok(())
            }
            (Family::Categorical(c), SamplePoint::Symbol(s)) => {
                if *s >= c.alphabet {
                    bail!(InvalidInput, "symbol {s} outside alphabet of size {}", c.alphabet);
                }
                Ok(())
            }
            _ => bail!(InvalidInput, "sample kind does not match a {:?} dictionary", self.kind()),
        }
    }

    /// Writes `f_i(ζ)` for every component into `out`.
    pub fn component_values_into(&self, zeta: &SamplePoint, out: &mut [f64]) -> Result<()> {
        self.check_point(zeta)?;
        if out.len() != self.len() {
            bail!(InvalidInput, "output buffer has length {}, dictionary has {}", out.len(), self.len());
        }
        match (&self.family, zeta) {
            (Family::Gaussian(g), SamplePoint::Continuous(x)) => g.values_into(x, out),
            (Family::Categorical(c), SamplePoint::Symbol(s)) => {
                out.fill(c.off_symbol());
                out[*s] = c.on_symbol();
            }
            _ => unreachable!("checked above"),
        }
        Ok(())
    }

    pub fn component_values(&self, zeta: &SamplePoint) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.component_values_into(zeta, &mut out)?;
        Ok(out)
    }

    fn check_weights(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.len() {
            bail!(InvalidInput, "weight vector has length {}, dictionary has {} components", m.len(), self.len());
        }
        Ok(())
    }

    /// Component values and the mixture `Σ m_i f_i(ζ)`.
    pub fn evaluate(&self, m: &WeightVector, zeta: &SamplePoint) -> Result<DensityEvaluation> {
        self.check_weights(m.as_slice())?;
        let values = self.component_values(zeta)?;
        let mixture = mixture_value(m.as_slice(), &values);
        Ok(DensityEvaluation { values, mixture })
    }

    /// Score vector `g_i = f_i(ζ) / Σ_τ m_τ f_τ(ζ)`.
    pub fn stochastic_gradient(&self, m: &WeightVector, zeta: &SamplePoint) -> Result<Vec<f64>> {
        let mut values = vec![0.0; self.len()];
        let mut score = vec![0.0; self.len()];
        self.score_into(m.as_slice(), zeta, &mut values, &mut score)?;
        Ok(score)
    }

    /// Allocation-free score computation; `values` is scratch space of
    /// length `M`. Returns the unfloored mixture value.
    pub fn score_into(&self, m: &[f64], zeta: &SamplePoint, values: &mut [f64], score: &mut [f64]) -> Result<f64> {
        self.check_weights(m)?;
        self.component_values_into(zeta, values)?;
        score_from_values(m, values, score)
    }

    /// Mixture probabilities `Q(j)` over the alphabet of a categorical
    /// dictionary.
    pub fn mixture_pmf(&self, m: &[f64]) -> Result<Vec<f64>> {
        self.check_weights(m)?;
        let Family::Categorical(c) = &self.family else {
            bail!(InvalidInput, "mixture_pmf needs a categorical dictionary");
        };
        let total: f64 = m.iter().sum();
        Ok(m.iter().map(|w| (1.0 - c.epsilon) * w + c.off_symbol() * total).collect())
    }

    /// Mixture density at every midpoint of `grid`, in grid storage order.
    ///
    /// Gaussian layers are separable, so each layer costs two small matrix
    /// products instead of `M` evaluations per cell.
    pub fn mixture_on_grid(&self, m: &[f64], grid: &MidpointGrid) -> Result<Vec<f64>> {
        self.check_weights(m)?;
        let Family::Gaussian(g) = &self.family else {
            bail!(InvalidInput, "mixture_on_grid needs a Gaussian dictionary");
        };
        if grid.domain().dim() != g.domain.dim() {
            bail!(InvalidInput, "grid dimension does not match the dictionary");
        }
        let r = grid.resolution();
        let axes: Vec<Vec<f64>> = (0..g.domain.dim()).map(|a| grid.axis(a)).collect();
        let mut out = vec![0.0; grid.len()];
        for layer in &g.layers {
            let s = layer.side;
            let kernel = |axis: usize| {
                DMatrix::from_fn(s, r, |p, a| {
                    let d = axes[axis][a] - layer.axis_centers[axis][p];
                    (-d * d / (2.0 * layer.sigma * layer.sigma)).exp()
                })
            };
            let weights = &m[layer.offset..layer.offset + layer.len(g.domain.dim())];
            match g.domain.dim() {
                1 => {
                    let ex = kernel(0);
                    for (a, o) in out.iter_mut().enumerate() {
                        let v: f64 = (0..s).map(|p| weights[p] * ex[(p, a)]).sum();
                        *o += layer.norm * v;
                    }
                }
                _ => {
                    let ex = kernel(0);
                    let ey = kernel(1);
                    let w = DMatrix::from_fn(s, s, |p, q| weights[p * s + q]);
                    let q = ex.transpose() * (w * ey);
                    for a in 0..r {
                        for b in 0..r {
                            out[a * r + b] += layer.norm * q[(a, b)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `G_∞` with the default 200-node-per-axis search for Gaussian grids.
    pub fn estimate_g_infinity(&self) -> GInfinity {
        self.estimate_g_infinity_with(200)
    }

    /// Bound on component ratios: exact for categorical dictionaries, a
    /// maximum over an evenly spaced node grid (edges included) for Gaussian
    /// ones. Ratios are taken in log space so distant components do not
    /// underflow.
    pub fn estimate_g_infinity_with(&self, nodes: usize) -> GInfinity {
        match &self.family {
            Family::Categorical(c) => {
                let k = c.alphabet as f64;
                let log_value = (k * (1.0 - c.epsilon) + c.epsilon).ln() - c.epsilon.ln();
                GInfinity { value: log_value.exp(), log_value, resolution: None }
            }
            Family::Gaussian(g) => {
                let nodes = nodes.max(2);
                let axes: Vec<Vec<f64>> =
                    (0..g.domain.dim()).map(|a| evenly_spaced(g.domain.lo[a], g.domain.hi[a], nodes)).collect();
                let total = nodes.pow(g.domain.dim() as u32);
                let mut worst = 0.0f64;
                for idx in 0..total {
                    let point: Vec<f64> = match g.domain.dim() {
                        1 => vec![axes[0][idx]],
                        _ => vec![axes[0][idx / nodes], axes[1][idx % nodes]],
                    };
                    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
                    for layer in &g.layers {
                        let (near, far): (f64, f64) = (0..point.len())
                            .map(|a| {
                                layer.axis_centers[a].iter().fold((f64::INFINITY, 0.0f64), |(n, f), c| {
                                    let d = (point[a] - c) * (point[a] - c);
                                    (n.min(d), f.max(d))
                                })
                            })
                            .fold((0.0, 0.0), |(n, f), (an, af)| (n + an, f + af));
                        let two_var = 2.0 * layer.sigma * layer.sigma;
                        hi = hi.max(layer.norm.ln() - near / two_var);
                        lo = lo.min(layer.norm.ln() - far / two_var);
                    }
                    worst = worst.max(hi - lo);
                }
                GInfinity { value: worst.exp(), log_value: worst, resolution: Some(nodes) }
            }
        }
    }
}

impl GaussianGrid {
    fn values_into(&self, x: &[f64], out: &mut [f64]) {
        let dim = self.domain.dim();
        let mut ex = Vec::new();
        let mut ey = Vec::new();
        for layer in &self.layers {
            let two_var = 2.0 * layer.sigma * layer.sigma;
            let along = |axis: usize, buf: &mut Vec<f64>| {
                buf.clear();
                buf.extend(layer.axis_centers[axis].iter().map(|c| {
                    let d = x[axis] - c;
                    (-d * d / two_var).exp()
                }));
            };
            along(0, &mut ex);
            let block = &mut out[layer.offset..layer.offset + layer.len(dim)];
            if dim == 1 {
                for (o, e) in block.iter_mut().zip(&ex) {
                    *o = layer.norm * e;
                }
            } else {
                along(1, &mut ey);
                for (row, a) in block.chunks_exact_mut(layer.side).zip(&ex) {
                    let scale = layer.norm * a;
                    for (o, b) in row.iter_mut().zip(&ey) {
                        *o = scale * b;
                    }
                }
            }
        }
    }
}

/// `Σ m_i f_i` in index order.
pub fn mixture_value(m: &[f64], values: &[f64]) -> f64 {
    m.iter().zip(values).map(|(w, f)| w * f).sum()
}

/// Score vector from raw component values; returns the unfloored mixture.
///
/// The mixture is floored at [`MIXTURE_FLOOR`] before division. A score that
/// still overflows is reported as a numeric error.
pub fn score_from_values(m: &[f64], values: &[f64], score: &mut [f64]) -> Result<f64> {
    if m.len() != values.len() || score.len() != values.len() {
        bail!(InvalidInput, "score needs equal-length weights, values and output");
    }
    let mixture = mixture_value(m, values);
    let divisor = mixture.max(MIXTURE_FLOOR);
    for (s, f) in score.iter_mut().zip(values) {
        *s = f / divisor;
    }
    if let Some(i) = score.iter().position(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!(
            "score entry {i} is {} (mixture {mixture:e}, component value {:e})",
            score[i], values[i]
        )));
    }
    Ok(mixture)
}
