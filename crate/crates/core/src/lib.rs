//! Online density estimation with mixture weights over a fixed kernel
//! dictionary.
//!
//! An unknown distribution `P*` is approximated by `Q(ζ) = Σ m_i f_i(ζ)` where
//! the `f_i` are fixed component densities and `m` lives on the probability
//! simplex. The weights are fitted one sample at a time by stochastic mirror
//! descent on the cross-entropy `E[log 1/Q(ζ)]`:
//!
//! * [`simplex`]: simplex geometry, mirror maps and Bregman divergences.
//! * [`dictionary`]: Gaussian-grid and smoothed categorical dictionaries.
//! * [`estimators`]: the mirror-descent estimators and step-size schedules.
//! * [`targets`]: synthetic ground-truth distributions with samplers.
//! * [`baselines`]: KDE, k-NN and add-a-constant comparison estimators.
//! * [`evaluation`]: best-in-class oracle, strong convexity, quadrature KL,
//!   convergence bounds and rate fits.

pub mod baselines;
pub mod dictionary;
mod error;
pub mod estimators;
pub mod evaluation;
pub mod grid;
pub mod rng;
pub mod simplex;
pub mod targets;

pub use error::{Error, Result};
pub use dictionary::{Dictionary, SamplePoint};
pub use simplex::{MirrorKind, MirrorMap, WeightVector};
