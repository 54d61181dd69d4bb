//! Single-exponent fits `p ≈ ε^{ĉn}` of small-ball tables.

use nalgebra::DVector;
use serde::Serialize;

use crate::analysis::estimate::{small_ball_profile, SmallBallEstimate};
use crate::error::{Error, Result};
use crate::measures::LogConcaveFamily;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitPoint {
    pub n: usize,
    pub epsilon: f64,
    pub log_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub pairs: Vec<FitPoint>,
    pub fitted_c: f64,
    /// Root-mean-square residual in natural-log units.
    pub residual: f64,
    /// `(n, ĉ_n)`: the same fit restricted to each dimension.
    pub per_n: Vec<(usize, f64)>,
}

fn slope(points: &[FitPoint]) -> f64 {
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), p| {
        let x = p.n as f64 * p.epsilon.ln();
        (sxy + x * p.log_p, sxx + x * x)
    });
    sxy / sxx
}

/// Least squares of `log p` against `n·log ε` through the origin.
pub fn exponent_fit(table: &[(usize, f64, f64)]) -> Result<ExponentFit> {
    if table.is_empty() {
        return Err(Error::InvalidArgument("exponent fit needs at least one row".into()));
    }
    for &(n, eps, p) in table {
        if n == 0 || !(eps > 0.0 && eps < 1.0) || !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!("invalid fit row (n={n}, ε={eps}, p={p})")));
        }
    }
    let pairs: Vec<FitPoint> = table.iter().map(|&(n, epsilon, p)| FitPoint { n, epsilon, log_p: p.ln() }).collect();
    let fitted_c = slope(&pairs);
    let residual = (pairs
        .iter()
        .map(|p| (p.log_p - fitted_c * p.n as f64 * p.epsilon.ln()).powi(2))
        .sum::<f64>()
        / pairs.len() as f64)
        .sqrt();
    let mut dims: Vec<usize> = pairs.iter().map(|p| p.n).collect();
    dims.sort_unstable();
    dims.dedup();
    let per_n = dims
        .into_iter()
        .map(|n| {
            let sub: Vec<FitPoint> = pairs.iter().copied().filter(|p| p.n == n).collect();
            (n, slope(&sub))
        })
        .collect();
    Ok(ExponentFit { pairs, fitted_c, residual, per_n })
}

/// Centered small-ball estimates at `r = √(εn)` over a grid of dimensions and
/// ε, one sample stream per dimension.
pub fn decay_table(
    family_at: impl Fn(usize) -> Result<LogConcaveFamily>,
    dims: &[usize],
    epsilons: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<(f64, SmallBallEstimate)>> {
    let mut out = Vec::new();
    for &n in dims {
        let family = family_at(n)?;
        let radii: Vec<f64> = epsilons.iter().map(|e| (e * n as f64).sqrt()).collect();
        let s = rng::derive_seed(seed, &[n as u64]);
        let rows = small_ball_profile(&family, &DVector::zeros(n), &radii, samples, s)?;
        out.extend(epsilons.iter().copied().zip(rows));
    }
    Ok(out)
}

/// Fit rows from a decay table, dropping zero-hit cells.
pub fn fit_rows(table: &[(f64, SmallBallEstimate)]) -> Vec<(usize, f64, f64)> {
    table.iter().filter(|(_, e)| e.hits > 0).map(|(eps, e)| (e.dimension, *eps, e.p_hat)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_fit() {
        let f = exponent_fit(&[(3, 0.2, 0.01)]).unwrap();
        assert!((f.fitted_c - 0.01f64.ln() / (3.0 * 0.2f64.ln())).abs() < 1e-15);
        assert!(f.residual < 1e-15);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(exponent_fit(&[]).is_err());
        assert!(exponent_fit(&[(2, 0.1, 0.0)]).is_err());
        assert!(exponent_fit(&[(2, 1.5, 0.1)]).is_err());
    }
}
