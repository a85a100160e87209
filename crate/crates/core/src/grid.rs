//! Axis-aligned domain boxes and midpoint quadrature grids.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// An axis-aligned box in one or two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || !(1..=2).contains(&lo.len()) {
            bail!(InvalidConfig, "domain box must be 1- or 2-dimensional with matching bounds");
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !a.is_finite() || !b.is_finite() || a >= b {
                bail!(InvalidConfig, "degenerate domain interval [{a}, {b}]");
            }
        }
        Ok(Self { lo, hi })
    }

    /// The square `[lo, hi]²`.
    pub fn square(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, lo], vec![hi, hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| v >= a && v <= b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Largest distance from `point` to any corner of the box.
    pub fn max_distance_from(&self, point: &[f64]) -> f64 {
        point
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(p, (a, b))| {
                let d = (p - a).abs().max((b - p).abs());
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Uniform midpoint-rule grid over a box, `resolution` cells per axis.
///
/// Values on the grid are stored with the first axis varying slowest:
/// cell `(a, b)` of a 2-D grid lives at index `a * resolution + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MidpointGrid {
    domain: BoxDomain,
    resolution: usize,
}

impl MidpointGrid {
    pub fn new(domain: BoxDomain, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            bail!(InvalidConfig, "quadrature resolution must be positive");
        }
        Ok(Self { domain, resolution })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.domain.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.domain.hi[axis] - self.domain.lo[axis]) / self.resolution as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.domain.dim()).map(|a| self.cell_width(a)).product()
    }

    /// Cell midpoints along one axis.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        let h = self.cell_width(axis);
        let lo = self.domain.lo[axis];
        (0..self.resolution).map(|i| lo + (i as f64 + 0.5) * h).collect()
    }

    /// The midpoint of the cell at flat index `idx`.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        match self.domain.dim() {
            1 => vec![self.domain.lo[0] + (idx as f64 + 0.5) * self.cell_width(0)],
            _ => {
                let (a, b) = (idx / self.resolution, idx % self.resolution);
                vec![
                    self.domain.lo[0] + (a as f64 + 0.5) * self.cell_width(0),
                    self.domain.lo[1] + (b as f64 + 0.5) * self.cell_width(1),
                ]
            }
        }
    }

    /// Evaluates `f` at every cell midpoint, in storage order.
    pub fn evaluate(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        use rayon::prelude::*;
        (0..self.len()).into_par_iter().map(|i| f(&self.point(i))).collect()
    }

    /// Midpoint-rule integral of values given in storage order.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume()
    }
}
