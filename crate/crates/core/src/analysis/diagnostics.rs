//! Moment diagnostics: Borell ratios and subgaussian norms of tilted measures.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::localization::{TiltState, ESS_DIVISOR};
use crate::measures::LogConcaveFamily;
use crate::rng::{self, tag};

/// A Monte-Carlo ratio estimate with its delta-method standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// `k` independent uniformly random unit vectors in ℝⁿ.
pub fn random_directions(n: usize, k: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = rng::stream(seed, &[tag::DIRECTION]);
    (0..k)
        .map(|_| {
            let v = DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
            let norm = v.norm();
            v / norm
        })
        .collect()
}

/// `(E|X·θ|^p)^{2/p} / E|X·θ|²`.
pub fn borell_ratio(
    family: &LogConcaveFamily,
    direction: &DVector<f64>,
    p: f64,
    samples: usize,
    seed: u64,
) -> Result<RatioEstimate> {
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!("Borell ratio needs p ≥ 2, got {p}")));
    }
    if direction.len() != family.dim() {
        return Err(Error::InvalidArgument("direction dimension mismatch".into()));
    }
    let theta = direction.normalize();
    // Σ|y|^p, Σy², Σ|y|^{2p}, Σy⁴, Σ|y|^{p+2}
    let sums = family
        .sample_chunks(samples, seed, |points| {
            let mut s = [0.0f64; 5];
            for x in points.rows() {
                let y: f64 = x.iter().zip(theta.iter()).map(|(a, b)| a * b).sum::<f64>().abs();
                let yp = y.powf(p);
                let y2 = y * y;
                s[0] += yp;
                s[1] += y2;
                s[2] += yp * yp;
                s[3] += y2 * y2;
                s[4] += yp * y2;
            }
            s
        })?
        .into_iter()
        .fold([0.0; 5], |mut acc, s| {
            acc.iter_mut().zip(s).for_each(|(a, b)| *a += b);
            acc
        });
    let nf = samples as f64;
    let (mp, m2) = (sums[0] / nf, sums[1] / nf);
    let var_p = (sums[2] / nf - mp * mp) / nf;
    let var_2 = (sums[3] / nf - m2 * m2) / nf;
    let cov = (sums[4] / nf - mp * m2) / nf;
    let value = mp.powf(2.0 / p) / m2;
    let gp = (2.0 / p) * mp.powf(2.0 / p - 1.0) / m2;
    let g2 = -value / m2;
    let var = gp * gp * var_p + g2 * g2 * var_2 + 2.0 * gp * g2 * cov;
    Ok(RatioEstimate { value, stderr: var.max(0.0).sqrt() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BorellRow {
    pub family: String,
    pub dimension: usize,
    pub p: f64,
    pub direction: usize,
    pub ratio: f64,
    pub stderr: f64,
}

/// Borell ratios over families, exponents and `directions` random directions.
pub fn borell_survey(
    families: &[LogConcaveFamily],
    ps: &[f64],
    directions: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<BorellRow>> {
    let mut rows = Vec::new();
    for (fi, family) in families.iter().enumerate() {
        let dirs = random_directions(family.dim(), directions, rng::derive_seed(seed, &[fi as u64]));
        for (di, dir) in dirs.iter().enumerate() {
            for &p in ps {
                let s = rng::derive_seed(seed, &[fi as u64, di as u64, p.to_bits()]);
                let r = borell_ratio(family, dir, p, samples, s)?;
                rows.push(BorellRow {
                    family: family.name().to_string(),
                    dimension: family.dim(),
                    p,
                    direction: di,
                    ratio: r.value,
                    stderr: r.stderr,
                });
            }
        }
    }
    Ok(rows)
}

/// The largest Borell ratio at `p = 4` over the zoo, checked against `C₀`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct C0Certificate {
    pub c0_constant: f64,
    pub worst: BorellRow,
    pub pass: bool,
}

pub fn certify_c0(c0_constant: f64, dims: &[usize], samples: usize, seed: u64) -> Result<C0Certificate> {
    let families: Vec<LogConcaveFamily> = dims.iter().flat_map(|&n| LogConcaveFamily::zoo(n)).collect();
    let rows = borell_survey(&families, &[4.0], 8, samples, seed)?;
    let worst = rows
        .into_iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .ok_or_else(|| Error::InvalidArgument("no dimensions to certify".into()))?;
    Ok(C0Certificate { c0_constant, pass: worst.ratio <= c0_constant, worst })
}

/// Importance-weighted draws from the base family, targeting `f_{t,θ}`.
struct WeightedSample {
    points: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
    ess: f64,
}

fn weighted_sample(family: &LogConcaveFamily, state: &TiltState, samples: usize, seed: u64) -> Result<WeightedSample> {
    let points = family.sample(samples, seed)?;
    let log_w: Vec<f64> = points.rows().map(|x| state.log_weight(x)).collect();
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    let s0: f64 = weights.iter().sum();
    let s00: f64 = weights.iter().map(|w| w * w).sum();
    let ess = s0 * s0 / s00;
    let threshold = samples as f64 / ESS_DIVISOR;
    if !(ess >= threshold) {
        return Err(Error::LowEss { ess, threshold, budget: samples });
    }
    Ok(WeightedSample { dim: family.dim(), points: points.as_slice().to_vec(), weights, ess })
}

impl WeightedSample {
    fn mean(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        let mut a = vec![0.0; self.dim];
        for (x, w) in self.points.chunks_exact(self.dim).zip(&self.weights) {
            for (ai, xi) in a.iter_mut().zip(x) {
                *ai += w * xi;
            }
        }
        a.iter_mut().for_each(|v| *v /= total);
        a
    }

    /// `(E|(Y - a)·u|^p)^{1/p}` for each `p`.
    fn central_abs_moments(&self, a: &[f64], u: &DVector<f64>, ps: &[f64]) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        let mut acc = vec![0.0; ps.len()];
        for (x, w) in self.points.chunks_exact(self.dim).zip(&self.weights) {
            let y: f64 = x.iter().zip(a).zip(u.iter()).map(|((xi, ai), ui)| (xi - ai) * ui).sum::<f64>().abs();
            for (s, &p) in acc.iter_mut().zip(ps) {
                *s += w * y.powf(p);
            }
        }
        acc.iter().zip(ps).map(|(s, &p)| (s / total).powf(1.0 / p)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubgaussianEstimate {
    /// `max_{p,u} (E|(Y-EY)·u|^p)^{1/p} / √p`.
    pub value: f64,
    pub p_at_max: f64,
    /// The bound `1/√t` predicted for a `t`-strongly log-concave law.
    pub predicted: f64,
    pub ess: f64,
}

/// Subgaussian norm of `f_{t,θ}` over even `p ≤ p_max` and 8 random directions.
pub fn subgaussian_norm(
    family: &LogConcaveFamily,
    t: f64,
    theta: &DVector<f64>,
    p_max: u32,
    samples: usize,
    seed: u64,
) -> Result<SubgaussianEstimate> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    if p_max < 2 || p_max % 2 != 0 {
        return Err(Error::InvalidArgument(format!("p_max must be an even integer ≥ 2, got {p_max}")));
    }
    let state = TiltState::new(t, theta.clone())?;
    let ws = weighted_sample(family, &state, samples, rng::derive_seed(seed, &[tag::SAMPLE]))?;
    let a = ws.mean();
    let ps: Vec<f64> = (1..=p_max / 2).map(|k| 2.0 * k as f64).collect();
    let mut best = (f64::NEG_INFINITY, 2.0);
    for u in random_directions(family.dim(), 8, seed) {
        for (m, &p) in ws.central_abs_moments(&a, &u, &ps).iter().zip(&ps) {
            let v = m / p.sqrt();
            if v > best.0 {
                best = (v, p);
            }
        }
    }
    Ok(SubgaussianEstimate { value: best.0, p_at_max: best.1, predicted: 1.0 / t.sqrt(), ess: ws.ess })
}

/// `(E|(Y - a)·u|^p)^{1/p}` under `f_{t,θ}` for each `p`.
pub fn directional_moments(
    family: &LogConcaveFamily,
    state: &TiltState,
    direction: &DVector<f64>,
    ps: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let ws = weighted_sample(family, state, samples, seed)?;
    let a = ws.mean();
    Ok(ws.central_abs_moments(&a, &direction.normalize(), ps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit() {
        for d in random_directions(5, 8, 3) {
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn borell_ratio_rejects_small_p() {
        let g = LogConcaveFamily::gaussian(2);
        assert!(borell_ratio(&g, &DVector::from_vec(vec![1.0, 0.0]), 1.5, 10, 0).is_err());
    }

    #[test]
    fn p_two_ratio_is_one() {
        let g = LogConcaveFamily::gaussian(3);
        let r = borell_ratio(&g, &DVector::from_vec(vec![0.0, 1.0, 0.0]), 2.0, 1000, 4).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subgaussian_rejects_odd_p() {
        let g = LogConcaveFamily::gaussian(1);
        assert!(subgaussian_norm(&g, 1.0, &DVector::zeros(1), 5, 100, 0).is_err());
    }
}
