//! Small-ball Monte Carlo with Wilson score intervals.

use nalgebra::DVector;
use serde::Serialize;
use statrs::function::erf::erf;
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::measures::LogConcaveFamily;

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// 95% Wilson score interval for `hits` successes out of `n`. With zero
/// hits the upper end is the exact one-sided bound `1 - 0.05^{1/n}`.
pub fn wilson_interval(hits: u64, n: u64) -> (f64, f64) {
    assert!(n > 0 && hits <= n);
    if hits == 0 {
        return (0.0, zero_hit_upper(n));
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Exact 95% upper confidence bound when no hit is observed in `n` trials.
pub fn zero_hit_upper(n: u64) -> f64 {
    // 1 - 0.05^{1/n}, computed without cancellation.
    -(0.05f64.ln() / n as f64).exp_m1()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallBallEstimate {
    pub family: String,
    pub dimension: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub samples: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl SmallBallEstimate {
    fn new(family: &LogConcaveFamily, center: &DVector<f64>, radius: f64, samples: u64, hits: u64, seed: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(hits, samples);
        SmallBallEstimate {
            family: family.name().to_string(),
            dimension: family.dim(),
            center: center.iter().copied().collect(),
            radius,
            samples,
            hits,
            p_hat: hits as f64 / samples as f64,
            ci_low,
            ci_high,
            seed,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    /// Binomial standard error of `p_hat`.
    pub fn stderr(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.samples as f64).sqrt()
    }
}

/// `P(|X - y| ≤ r)` from `samples` fresh draws.
pub fn small_ball_estimate(
    family: &LogConcaveFamily,
    center: &DVector<f64>,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<SmallBallEstimate> {
    Ok(small_ball_profile(family, center, &[radius], samples, seed)?.remove(0))
}

/// Small-ball estimates for several radii from one sample stream; the
/// estimate for each radius equals `small_ball_estimate` with the same seed.
pub fn small_ball_profile(
    family: &LogConcaveFamily,
    center: &DVector<f64>,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<SmallBallEstimate>> {
    if center.len() != family.dim() {
        return Err(Error::InvalidArgument("center dimension mismatch".into()));
    }
    if radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidArgument("radii must be nonnegative".into()));
    }
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let counts = family
        .sample_chunks(samples, seed, |points| {
            let mut hits = vec![0u64; r2.len()];
            for x in points.rows() {
                let d: f64 = x.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                for (h, &r) in hits.iter_mut().zip(&r2) {
                    // A ball of radius zero is a null set.
                    if r > 0.0 && d <= r {
                        *h += 1;
                    }
                }
            }
            hits
        })?
        .into_iter()
        .fold(vec![0u64; r2.len()], |mut acc, h| {
            acc.iter_mut().zip(h).for_each(|(a, b)| *a += b);
            acc
        });
    Ok(radii
        .iter()
        .zip(counts)
        .map(|(&r, hits)| SmallBallEstimate::new(family, center, r, samples as u64, hits, seed))
        .collect())
}

/// Exact Gaussian small-ball probability `P(χ²ₙ ≤ εn)` and the Chernoff
/// bound `(ε·e^{1-ε})^{n/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianSmallBall {
    pub exact: f64,
    pub chernoff: f64,
}

pub fn gaussian_small_ball_oracle(n: usize, epsilon: f64) -> Result<GaussianSmallBall> {
    if n == 0 || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("need n ≥ 1 and ε ∈ (0,1), got n={n}, ε={epsilon}")));
    }
    let half = 0.5 * n as f64;
    let exact = gamma_lr(half, half * epsilon);
    let chernoff = (half * (epsilon.ln() + 1.0 - epsilon)).exp();
    Ok(GaussianSmallBall { exact, chernoff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_hit_bound() {
        let (lo, hi) = wilson_interval(0, 10_000);
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 1.0 - 0.05f64.powf(1e-4), epsilon = 1e-15);
    }

    #[test]
    fn wilson_brackets_p_hat() {
        for (h, n) in [(1, 10), (5, 10), (10, 10), (3, 1_000_000)] {
            let (lo, hi) = wilson_interval(h, n);
            let p = h as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{h}/{n}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn wilson_known_value() {
        // 8/10 at 95%: [0.4902, 0.9433] (standard tables).
        let (lo, hi) = wilson_interval(8, 10);
        assert_abs_diff_eq!(lo, 0.4902, epsilon = 1e-4);
        assert_abs_diff_eq!(hi, 0.9433, epsilon = 1e-4);
    }

    #[test]
    fn chi_square_two_dof() {
        let o = gaussian_small_ball_oracle(2, 0.5).unwrap();
        assert_abs_diff_eq!(o.exact, 1.0 - (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn chernoff_ten_dof() {
        let o = gaussian_small_ball_oracle(10, 0.1).unwrap();
        assert_abs_diff_eq!(o.chernoff, (0.1 * 0.9f64.exp()).powi(5), epsilon = 1e-15);
        assert!(o.exact <= o.chernoff);
        let edge = gaussian_small_ball_oracle(1, 0.9999).unwrap();
        assert!(edge.chernoff > 0.999_999 && edge.exact < 1.0);
    }
}
