//! Synthetic ground-truth distributions.
//!
//! Continuous targets are equal-weight mixtures of modes truncated to a 2-D
//! domain box; each mode is renormalized to the box by 1000×1000 midpoint
//! quadrature at construction. Samplers draw exactly from the truncated modes
//! by rejection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::SamplePoint;
use crate::error::{bail, Result};
use crate::grid::{BoxDomain, MidpointGrid};
use crate::rng::{self, StreamRng};

/// Resolution per axis of the quadrature that normalizes each mode.
pub const NORMALIZER_RESOLUTION: usize = 1000;

/// Tolerance on the total mass of a target.
pub const MASS_TOLERANCE: f64 = 5e-3;

/// A single component of a continuous target, before truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// Ring with a Gaussian radial profile: `exp(−(r − radius)²/(2 width²))`.
    Ring { center: [f64; 2], radius: f64, width: f64 },
    /// Uniform on an axis-aligned rectangle.
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
    /// `exp(−zᵀ B z)` with `z = ζ − mean` and `B` symmetric positive definite.
    QuadraticForm { mean: [f64; 2], form: [[f64; 2]; 2] },
    /// Isotropic Gaussian.
    Gaussian { center: [f64; 2], sigma: f64 },
}

impl Mode {
    fn validate(&self) -> Result<()> {
        match *self {
            Mode::Ring { radius, width, .. } => {
                if !(radius > 0.0 && width > 0.0) {
                    bail!(InvalidConfig, "ring radius and width must be positive");
                }
            }
            Mode::Rectangle { lo, hi } => {
                if !(lo[0] < hi[0] && lo[1] < hi[1]) {
                    bail!(InvalidConfig, "rectangle bounds are degenerate");
                }
            }
            Mode::QuadraticForm { form, .. } => {
                let [[a, b], [c, d]] = form;
                if (b - c).abs() > 1e-12 || !(a > 0.0) || !(a * d - b * c > 0.0) {
                    bail!(InvalidConfig, "quadratic form must be symmetric positive definite");
                }
            }
            Mode::Gaussian { sigma, .. } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    bail!(InvalidConfig, "Gaussian sigma must be positive, got {sigma}");
                }
            }
        }
        Ok(())
    }

    /// Unnormalized density.
    pub fn profile(&self, x: f64, y: f64) -> f64 {
        match *self {
            Mode::Ring { center, radius, width } => {
                let r = ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt();
                (-(r - radius).powi(2) / (2.0 * width * width)).exp()
            }
            Mode::Rectangle { lo, hi } => {
                if x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1] {
                    1.0
                } else {
                    0.0
                }
            }
            Mode::QuadraticForm { mean, form } => {
                let (u, v) = (x - mean[0], y - mean[1]);
                (-(form[0][0] * u * u + (form[0][1] + form[1][0]) * u * v + form[1][1] * v * v)).exp()
            }
            Mode::Gaussian { center, sigma } => {
                let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    /// One draw from the untruncated mode.
    fn draw(&self, rng: &mut StreamRng, domain: &BoxDomain) -> [f64; 2] {
        match *self {
            Mode::Ring { center, radius, width } => {
                // Proposal radius ~ N(radius, width²); accepting with
                // probability r / r_max turns it into the exact radial law
                // r·exp(−(r − radius)²/(2 width²)) within the box.
                let r_max = domain.max_distance_from(&center);
                loop {
                    let r = radius + width * rng::standard_normal(rng);
                    if r <= 0.0 || r > r_max {
                        continue;
                    }
                    if rng::uniform(rng) * r_max < r {
                        let angle = std::f64::consts::TAU * rng::uniform(rng);
                        return [center[0] + r * angle.cos(), center[1] + r * angle.sin()];
                    }
                }
            }
            Mode::Rectangle { lo, hi } => {
                [lo[0] + (hi[0] - lo[0]) * rng::uniform(rng), lo[1] + (hi[1] - lo[1]) * rng::uniform(rng)]
            }
            Mode::QuadraticForm { mean, form } => {
                // exp(−zᵀBz) is a Gaussian with precision 2B.
                let [[a, b], [_, d]] = form;
                let det = 4.0 * (a * d - b * b);
                let (s11, s12, s22) = (2.0 * d / det, -2.0 * b / det, 2.0 * a / det);
                let l11 = s11.sqrt();
                let l21 = s12 / l11;
                let l22 = (s22 - l21 * l21).sqrt();
                let (z1, z2) = (rng::standard_normal(rng), rng::standard_normal(rng));
                [mean[0] + l11 * z1, mean[1] + l21 * z1 + l22 * z2]
            }
            Mode::Gaussian { center, sigma } => {
                let (z1, z2) = (rng::standard_normal(rng), rng::standard_normal(rng));
                [center[0] + sigma * z1, center[1] + sigma * z2]
            }
        }
    }
}

/// Configuration of a synthetic target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    FourMode,
    WidePlusSpikes {
        #[serde(default = "default_wide_sigma")]
        wide_sigma: f64,
        #[serde(default = "default_spikes")]
        spikes: Vec<SpikeSpec>,
    },
    SparseCategorical {
        #[serde(default = "default_alphabet")]
        alphabet: usize,
        #[serde(default = "default_support")]
        support_size: usize,
        #[serde(default)]
        decay: Decay,
        #[serde(default)]
        seed: u64,
    },
    /// An explicit probability vector over the alphabet.
    Categorical { pmf: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeSpec {
    pub center: [f64; 2],
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    Uniform,
    #[default]
    Zipf,
}

fn default_wide_sigma() -> f64 {
    2.0
}

fn default_spikes() -> Vec<SpikeSpec> {
    [[3.0, 3.0], [3.0, -3.0], [-3.0, 3.0], [-3.0, -3.0]]
        .into_iter()
        .map(|center| SpikeSpec { center, sigma: 0.1 })
        .collect()
}

fn default_alphabet() -> usize {
    1000
}

fn default_support() -> usize {
    50
}

impl TargetSpec {
    pub fn build(&self) -> Result<Target> {
        match self {
            TargetSpec::FourMode => Target::four_mode(),
            TargetSpec::WidePlusSpikes { wide_sigma, spikes } => Target::wide_plus_spikes(*wide_sigma, spikes),
            TargetSpec::SparseCategorical { alphabet, support_size, decay, seed } => {
                Target::sparse_categorical(*alphabet, *support_size, *decay, *seed)
            }
            TargetSpec::Categorical { pmf } => Target::categorical(pmf.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    FourMode,
    WidePlusSpikes,
    SparseCategorical,
    Categorical,
}

#[derive(Debug, Clone)]
struct ContinuousMixture {
    domain: BoxDomain,
    modes: Vec<Mode>,
    /// Mass of each mode's profile inside the box.
    normalizers: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Law {
    Continuous(ContinuousMixture),
    Categorical { pmf: Vec<f64>, cdf: Vec<f64> },
}

/// An immutable ground-truth distribution.
#[derive(Debug, Clone)]
pub struct Target {
    kind: TargetKind,
    law: Law,
}

impl Target {
    /// Donut, square, diagonal Gaussian and spike on `[−5, 5]²`, ¼ each.
    pub fn four_mode() -> Result<Self> {
        let modes = vec![
            Mode::Ring { center: [0.0, 0.0], radius: 2.5, width: 0.2 },
            Mode::Rectangle { lo: [-2.75, 1.25], hi: [-1.25, 2.75] },
            Mode::QuadraticForm { mean: [2.5, 2.5], form: [[2.0, -1.75], [-1.75, 2.0]] },
            Mode::Gaussian { center: [-2.0, -2.0], sigma: 0.1 },
        ];
        Self::continuous(TargetKind::FourMode, BoxDomain::square(-5.0, 5.0)?, modes)
    }

    /// One wide Gaussian at the origin plus sharp spikes, equal weights, on
    /// `[−5, 5]²`.
    pub fn wide_plus_spikes(wide_sigma: f64, spikes: &[SpikeSpec]) -> Result<Self> {
        if spikes.is_empty() {
            bail!(InvalidConfig, "at least one spike is required");
        }
        let domain = BoxDomain::square(-5.0, 5.0)?;
        let mut modes = vec![Mode::Gaussian { center: [0.0, 0.0], sigma: wide_sigma }];
        for s in spikes {
            if !domain.contains(&s.center) {
                bail!(InvalidConfig, "spike center {:?} lies outside the domain", s.center);
            }
            modes.push(Mode::Gaussian { center: s.center, sigma: s.sigma });
        }
        Self::continuous(TargetKind::WidePlusSpikes, domain, modes)
    }

    /// Equal-weight mixture of `modes`, each truncated to `domain`.
    pub fn continuous(kind: TargetKind, domain: BoxDomain, modes: Vec<Mode>) -> Result<Self> {
        if domain.dim() != 2 {
            bail!(InvalidConfig, "continuous targets are two-dimensional");
        }
        if modes.is_empty() {
            bail!(InvalidConfig, "a continuous target needs at least one mode");
        }
        for m in &modes {
            m.validate()?;
        }
        let grid = MidpointGrid::new(domain.clone(), NORMALIZER_RESOLUTION)?;
        let normalizers: Vec<f64> = modes
            .iter()
            .map(|mode| grid.integrate(&grid.evaluate(|p| mode.profile(p[0], p[1]))))
            .collect();
        if let Some(i) = normalizers.iter().position(|z| !(*z > 0.0)) {
            bail!(InvalidConfig, "mode {i} has no mass inside the domain box");
        }
        let target = Self { kind, law: Law::Continuous(ContinuousMixture { domain, modes, normalizers }) };
        let check = MidpointGrid::new(target.domain().unwrap().clone(), 400)?;
        let mass = check.integrate(&target.density_on_grid(&check)?);
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            bail!(Numeric, "target density integrates to {mass} on a 400x400 grid");
        }
        Ok(target)
    }

    /// Mass on a seeded random subset of `support` symbols out of
    /// `alphabet`, uniform or decaying as `1/rank`.
    pub fn sparse_categorical(alphabet: usize, support: usize, decay: Decay, seed: u64) -> Result<Self> {
        if support == 0 || support > alphabet {
            bail!(InvalidConfig, "support size {support} must lie in 1..={alphabet}");
        }
        let mut rng = rng::seeded(seed);
        let mut symbols: Vec<usize> = (0..alphabet).collect();
        for i in 0..support {
            let j = rng.random_range(i..alphabet);
            symbols.swap(i, j);
        }
        let raw: Vec<f64> = (1..=support)
            .map(|rank| match decay {
                Decay::Uniform => 1.0,
                Decay::Zipf => 1.0 / rank as f64,
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let mut pmf = vec![0.0; alphabet];
        for (s, w) in symbols[..support].iter().zip(&raw) {
            pmf[*s] = w / total;
        }
        let mut t = Self::categorical(pmf)?;
        t.kind = TargetKind::SparseCategorical;
        Ok(t)
    }

    /// Target with an explicit probability vector.
    pub fn categorical(pmf: Vec<f64>) -> Result<Self> {
        if pmf.len() < 2 {
            bail!(InvalidConfig, "categorical target needs at least 2 symbols");
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            bail!(InvalidConfig, "pmf entries must be finite and nonnegative");
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            bail!(InvalidConfig, "pmf sums to {total}");
        }
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { kind: TargetKind::Categorical, law: Law::Categorical { pmf, cdf } })
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.law, Law::Categorical { .. })
    }

    pub fn domain(&self) -> Option<&BoxDomain> {
        match &self.law {
            Law::Continuous(c) => Some(&c.domain),
            Law::Categorical { .. } => None,
        }
    }

    pub fn pmf(&self) -> Option<&[f64]> {
        match &self.law {
            Law::Categorical { pmf, .. } => Some(pmf),
            Law::Continuous(_) => None,
        }
    }

    pub fn alphabet(&self) -> Option<usize> {
        self.pmf().map(<[f64]>::len)
    }

    pub fn modes(&self) -> &[Mode] {
        match &self.law {
            Law::Continuous(c) => &c.modes,
            Law::Categorical { .. } => &[],
        }
    }

    /// Mass of each mode's unnormalized profile inside the box.
    pub fn normalizers(&self) -> &[f64] {
        match &self.law {
            Law::Continuous(c) => &c.normalizers,
            Law::Categorical { .. } => &[],
        }
    }

    /// `n` i.i.d. draws, deterministic given the generator state.
    pub fn sample(&self, rng: &mut StreamRng, n: usize) -> Vec<SamplePoint> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample_one(&self, rng: &mut StreamRng) -> SamplePoint {
        match &self.law {
            Law::Continuous(c) => {
                let k = rng.random_range(0..c.modes.len());
                loop {
                    let p = c.modes[k].draw(rng, &c.domain);
                    if c.domain.contains(&p) {
                        return SamplePoint::Continuous(p.to_vec());
                    }
                }
            }
            Law::Categorical { cdf, pmf } => {
                let u = rng::uniform(rng) * cdf.last().copied().unwrap_or(1.0);
                let mut j = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                // Never land on a zero-probability symbol at the top end.
                while pmf[j] == 0.0 && j > 0 {
                    j -= 1;
                }
                SamplePoint::Symbol(j)
            }
        }
    }

    /// Normalized density (or probability) at `zeta`.
    pub fn density(&self, zeta: &SamplePoint) -> Result<f64> {
        match (&self.law, zeta) {
            (Law::Continuous(c), SamplePoint::Continuous(x)) => {
                if !c.domain.contains(x) {
                    bail!(InvalidInput, "point {x:?} lies outside the target domain");
                }
                Ok(c.density_xy(x[0], x[1]))
            }
            (Law::Categorical { pmf, .. }, SamplePoint::Symbol(s)) => match pmf.get(*s) {
                Some(p) => Ok(*p),
                None => bail!(InvalidInput, "symbol {s} outside alphabet of size {}", pmf.len()),
            },
            _ => bail!(InvalidInput, "sample kind does not match the target"),
        }
    }

    /// Density at every midpoint of `grid`.
    pub fn density_on_grid(&self, grid: &MidpointGrid) -> Result<Vec<f64>> {
        let Law::Continuous(c) = &self.law else {
            bail!(InvalidInput, "grid evaluation needs a continuous target");
        };
        if grid.domain().dim() != 2 {
            bail!(InvalidInput, "continuous targets are two-dimensional");
        }
        Ok(grid.evaluate(|p| c.density_xy(p[0], p[1])))
    }

    /// Grid of `(x, y, p)` rows for plotting.
    pub fn density_csv(&self, resolution: usize) -> Result<String> {
        let Some(domain) = self.domain() else {
            bail!(InvalidInput, "density export needs a continuous target");
        };
        let grid = MidpointGrid::new(domain.clone(), resolution)?;
        let values = self.density_on_grid(&grid)?;
        let mut out = String::from("x,y,p\n");
        for (i, v) in values.iter().enumerate() {
            let p = grid.point(i);
            out.push_str(&format!("{},{},{}\n", p[0], p[1], v));
        }
        Ok(out)
    }
}

impl ContinuousMixture {
    fn density_xy(&self, x: f64, y: f64) -> f64 {
        let weight = 1.0 / self.modes.len() as f64;
        self.modes.iter().zip(&self.normalizers).map(|(m, z)| m.profile(x, y) / z).sum::<f64>() * weight
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_mode_landmarks() {
        let t = Target::four_mode().unwrap();
        let spike = t.density(&SamplePoint::xy(-2.0, -2.0)).unwrap();
        let origin = t.density(&SamplePoint::xy(0.0, 0.0)).unwrap();
        let corner = t.density(&SamplePoint::xy(5.0, -5.0)).unwrap();
        let square = t.density(&SamplePoint::xy(-2.7, 2.7)).unwrap();
        // spike peak: ¼ / (2π·0.1²)
        assert!((spike - 0.25 / (2.0 * std::f64::consts::PI * 0.01)).abs() < 0.01 * spike);
        // Only the diagonal form reaches the origin: zᵀBz = 3.125 there.
        let form_only = 0.25 * (-3.125f64).exp() / t.normalizers()[2];
        assert!((origin - form_only).abs() < 1e-9 * form_only);
        assert!(corner <= 1e-6);
        assert!((square - 0.25 / 2.25).abs() < 1e-4);
        assert!(t.density(&SamplePoint::xy(6.0, 0.0)).is_err());
    }

    #[test]
    fn diagonal_normalizer_matches_closed_form() {
        // The box cuts the form, so compare with composite Simpson over the
        // box and with π / sqrt(det B) as an upper bound.
        let t = Target::four_mode().unwrap();
        let det: f64 = 2.0 * 2.0 - 1.75 * 1.75;
        let untruncated = std::f64::consts::PI / det.sqrt();
        let n = 1200;
        let h = 10.0 / n as f64;
        let weight = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let mut simpson = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let (u, v) = (-5.0 + i as f64 * h - 2.5, -5.0 + j as f64 * h - 2.5);
                simpson += weight(i) * weight(j) * (-(2.0 * u * u - 3.5 * u * v + 2.0 * v * v)).exp();
            }
        }
        simpson *= h * h / 9.0;
        assert!((t.normalizers()[2] - simpson).abs() < 1e-4 * simpson);
        assert!(t.normalizers()[2] < untruncated);
        assert!((t.normalizers()[1] - 2.25).abs() < 1e-9);
    }

    #[test]
    fn wide_plus_spikes_rules() {
        let spikes = default_spikes();
        let t = Target::wide_plus_spikes(2.0, &spikes).unwrap();
        let at_spike = t.density(&SamplePoint::xy(3.0, 3.0)).unwrap();
        let at_center = t.density(&SamplePoint::xy(0.0, 0.0)).unwrap();
        assert!(at_spike > at_center);
        assert!(Target::wide_plus_spikes(2.0, &[]).is_err());

        let same = Target::wide_plus_spikes(1.0, &[SpikeSpec { center: [1.0, 0.0], sigma: 1.0 }]).unwrap();
        let p = SamplePoint::xy(0.3, -0.4);
        let z = same.normalizers();
        let by_hand = 0.5
            * ((-(0.09 + 0.16) / 2.0f64).exp() / z[0] + (-(0.49 + 0.16) / 2.0f64).exp() / z[1]);
        assert!((same.density(&p).unwrap() - by_hand).abs() < 1e-15);
    }

    #[test]
    fn sparse_categorical_construction() {
        let t = Target::sparse_categorical(4, 4, Decay::Uniform, 1).unwrap();
        assert_eq!(t.pmf().unwrap(), &[0.25; 4]);
        let t = Target::sparse_categorical(4, 1, Decay::Zipf, 9).unwrap();
        assert_eq!(t.pmf().unwrap().iter().filter(|p| **p == 1.0).count(), 1);
        assert_eq!(t.pmf().unwrap().iter().filter(|p| **p == 0.0).count(), 3);
        let t = Target::sparse_categorical(1000, 50, Decay::Zipf, 3).unwrap();
        let pmf = t.pmf().unwrap();
        assert_eq!(pmf.iter().filter(|p| **p == 0.0).count(), 950);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(Target::sparse_categorical(4, 5, Decay::Zipf, 0).is_err());
    }

    #[test]
    fn categorical_sampling_and_density() {
        let t = Target::categorical(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.density(&SamplePoint::Symbol(1)).unwrap(), 1.0);
        assert_eq!(t.density(&SamplePoint::Symbol(2)).unwrap(), 0.0);
        let mut rng = rng::seeded(5);
        assert!(t.sample(&mut rng, 200).iter().all(|s| *s == SamplePoint::Symbol(1)));
        assert!(t.sample(&mut rng, 0).is_empty());
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = Target::four_mode().unwrap();
        let a = t.sample(&mut rng::seeded(11), 500);
        let b = t.sample(&mut rng::seeded(11), 500);
        assert_eq!(a, b);
        let domain = t.domain().unwrap();
        assert!(a.iter().all(|s| domain.contains(s.coords().unwrap())));
    }

    #[test]
    fn density_csv_header() {
        let t = Target::four_mode().unwrap();
        let csv = t.density_csv(4).unwrap();
        assert!(csv.starts_with("x,y,p\n"));
        assert_eq!(csv.lines().count(), 17);
    }
}
