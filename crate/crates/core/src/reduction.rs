//! Reduction to a bounded, isotropic, symmetric family.
//!
//! `X₁ = (X - X')/√2`, then `X₂ = X₁ | |X₁| ≤ 2·C₀·√n`, then
//! `X₃ = Cov(X₂)^{-1/2} X₂`. Conditioning keeps at least `1 - 1/(4C₀²)` of
//! the mass, `Cov(X₂)` lies between `I/2` and `2I`, and `X₃` is supported in
//! `B(0, 2√2·C₀·√n)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues_desc, inverse_sqrt, norm_sq};
use crate::measures::{empirical_moments, LogConcaveFamily, MIN_ACCEPTANCE_RATE};
use crate::rng;

pub const DEFAULT_C0: f64 = 3.0;
/// Covariance samples per squared dimension.
pub const COVARIANCE_SAMPLES_PER_DIM2: usize = 200;
pub const DEFAULT_MASS_SAMPLES: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub c0_constant_used: f64,
    pub conditioning_mass: f64,
    pub covariance_spectrum_bounds: (f64, f64),
    pub final_support_radius: f64,
}

/// Conditioning mass estimated by plain Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassEstimate {
    pub mass: f64,
    pub stderr: f64,
    pub samples: usize,
}

pub fn symmetrize(family: &LogConcaveFamily) -> LogConcaveFamily {
    LogConcaveFamily::symmetrized(family)
}

/// `X | X ∈ B₂(0, radius)` and the estimated mass of the ball.
pub fn condition_to_ball(
    family: &LogConcaveFamily,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<(LogConcaveFamily, MassEstimate)> {
    let conditioned = LogConcaveFamily::restricted(family, radius)?;
    let r2 = radius * radius;
    let hits: usize = family
        .sample_chunks(samples, seed, |p| p.rows().filter(|x| norm_sq(x) <= r2).count())?
        .into_iter()
        .sum();
    let mass = hits as f64 / samples as f64;
    if mass < MIN_ACCEPTANCE_RATE {
        return Err(Error::RejectionStall { rate: mass, window: samples });
    }
    let stderr = (mass * (1.0 - mass) / samples as f64).sqrt();
    Ok((conditioned, MassEstimate { mass, stderr, samples }))
}

/// Empirical covariance of `count` samples.
pub fn estimate_covariance(family: &LogConcaveFamily, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    if count < family.dim() {
        return Err(Error::InvalidArgument(format!(
            "covariance estimation needs at least n = {} samples, got {count}",
            family.dim()
        )));
    }
    Ok(empirical_moments(&family.sample(count, seed)?).covariance)
}

/// Law of `Cov^{-1/2} X`.
pub fn whiten(family: &LogConcaveFamily, covariance: &DMatrix<f64>) -> Result<LogConcaveFamily> {
    let n = family.dim();
    if covariance.shape() != (n, n) {
        return Err(Error::InvalidArgument("covariance shape does not match the family".into()));
    }
    if *covariance == DMatrix::identity(n, n) {
        return Ok(family.clone());
    }
    let m = inverse_sqrt(covariance)?;
    let name = format!("white({})", family.name());
    Ok(LogConcaveFamily::affine(family, m, DVector::zeros(n))?.with_name(name))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReduceOptions {
    pub c0_constant: f64,
    pub covariance_samples: Option<usize>,
    pub mass_samples: usize,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions { c0_constant: DEFAULT_C0, covariance_samples: None, mass_samples: DEFAULT_MASS_SAMPLES }
    }
}

pub fn reduce(family: &LogConcaveFamily, c0_constant: f64, seed: u64) -> Result<(LogConcaveFamily, ReductionReport)> {
    reduce_with(family, &ReduceOptions { c0_constant, ..ReduceOptions::default() }, seed)
}

pub fn reduce_with(
    family: &LogConcaveFamily,
    options: &ReduceOptions,
    seed: u64,
) -> Result<(LogConcaveFamily, ReductionReport)> {
    let c0 = options.c0_constant;
    if !(c0 > 0.0) {
        return Err(Error::InvalidArgument(format!("c0 must be positive, got {c0}")));
    }
    let n = family.dim();
    let symmetric = symmetrize(family);
    let radius = 2.0 * c0 * (n as f64).sqrt();
    let (conditioned, mass) =
        condition_to_ball(&symmetric, radius, options.mass_samples, rng::derive_seed(seed, &[1]))?;
    let count = options.covariance_samples.unwrap_or(COVARIANCE_SAMPLES_PER_DIM2 * n * n).max(n);
    let cov = estimate_covariance(&conditioned, count, rng::derive_seed(seed, &[2]))?;
    let spectrum = eigenvalues_desc(&cov);
    let reduced = whiten(&conditioned, &cov)?.with_name(format!("reduced({})", family.name()));
    let report = ReductionReport {
        c0_constant_used: c0,
        conditioning_mass: mass.mass,
        covariance_spectrum_bounds: (spectrum[n - 1], spectrum[0]),
        final_support_radius: reduced.support_radius().expect("restriction bounds the support"),
    };
    Ok((reduced, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whiten_identity_is_noop() {
        let c = LogConcaveFamily::uniform_cube(3);
        let w = whiten(&c, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(w.name(), c.name());
        assert_eq!(w.support_radius(), c.support_radius());
    }

    #[test]
    fn singular_covariance_names_eigenvalue() {
        let c = LogConcaveFamily::gaussian(2);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match whiten(&c, &cov) {
            Err(Error::SingularCovariance { eigenvalue, .. }) => assert!(eigenvalue.abs() < 1e-12),
            other => panic!("expected singular covariance, got {other:?}"),
        }
    }

    #[test]
    fn covariance_needs_n_samples() {
        assert!(estimate_covariance(&LogConcaveFamily::gaussian(4), 3, 0).is_err());
    }
}
