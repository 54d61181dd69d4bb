//! Isotropic constants of convex bodies and intersection volumes with
//! centered balls.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::analysis::checks::mean_stderr;
use crate::analysis::estimate::{small_ball_profile, wilson_interval};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{log_ball_volume, LogConcaveFamily};
use crate::rng::{self, tag};

/// Batches used for batch-means standard errors.
pub const BATCHES: usize = 32;

/// A convex body in ℝⁿ given by its vertices, with facets found by brute force.
#[derive(Clone, Debug)]
pub struct Polytope {
    pub vertices: Vec<Vec<f64>>,
    /// `(normal, offset)` with the body `{x : normal·x ≤ offset}`.
    facets: Vec<(Vec<f64>, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn combinations(m: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > m {
        return;
    }
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

impl Polytope {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let n = vertices.first().map(|v| v.len()).unwrap_or(0);
        if n == 0 || vertices.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidArgument("vertices must be nonempty points of equal dimension".into()));
        }
        if vertices.len() <= n {
            return Err(Error::InvalidArgument(format!("{} vertices cannot span ℝ^{n}", vertices.len())));
        }
        let scale = vertices.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let tol = 1e-9 * scale;
        let mut facets: Vec<(Vec<f64>, f64)> = Vec::new();
        combinations(vertices.len(), n, |subset| {
            let v0 = &vertices[subset[0]];
            let mut m = DMatrix::zeros(n, n);
            for (r, &j) in subset[1..].iter().enumerate() {
                for c in 0..n {
                    m[(r, c)] = vertices[j][c] - v0[c];
                }
            }
            let svd = m.svd(false, true);
            let vt = svd.v_t.expect("requested");
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            // The n-1 difference rows must be independent.
            if n > 1 && svd.singular_values[order[n - 2]] <= tol {
                return;
            }
            let normal: Vec<f64> = vt.row(order[n - 1]).iter().copied().collect();
            let offset = linalg::dot(&normal, v0);
            let side: Vec<f64> = vertices.iter().map(|v| linalg::dot(&normal, v) - offset).collect();
            let (normal, offset) = if side.iter().all(|&s| s <= tol) {
                (normal, offset)
            } else if side.iter().all(|&s| s >= -tol) {
                (normal.iter().map(|x| -x).collect(), -offset)
            } else {
                return;
            };
            let seen = facets
                .iter()
                .any(|(nv, o)| (o - offset).abs() <= tol && nv.iter().zip(&normal).all(|(a, b)| (a - b).abs() <= 1e-9));
            if !seen {
                facets.push((normal, offset));
            }
        });
        if facets.len() <= n {
            return Err(Error::InvalidArgument("vertices do not span a full-dimensional body".into()));
        }
        let lower = (0..n).map(|c| vertices.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min)).collect();
        let upper = (0..n).map(|c| vertices.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max)).collect();
        Ok(Polytope { vertices, facets, lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.facets.iter().all(|(nv, o)| linalg::dot(nv, x) <= o + 1e-12)
    }

    /// `[-1, 1]ⁿ` as a vertex list.
    pub fn cube(n: usize) -> Result<Self> {
        let vertices = (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect())
            .collect();
        Polytope::new(vertices)
    }

    /// Vertices of the isotropic simplex.
    pub fn simplex(n: usize) -> Result<Self> {
        Polytope::new(isotropic_simplex_vertices(n))
    }

    fn box_log_volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l).ln()).sum()
    }

    /// Accepted uniform points from `proposals` bounding-box draws of one stream.
    fn draw(&self, proposals: usize, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = rng::stream(seed, &[tag::SAMPLE, index]);
        let n = self.dim();
        let mut out = Vec::new();
        let mut x = vec![0.0; n];
        for _ in 0..proposals {
            for c in 0..n {
                x[c] = rng.random_range(self.lower[c]..self.upper[c]);
            }
            if self.contains(&x) {
                out.extend_from_slice(&x);
            }
        }
        out
    }
}

/// The standard simplex `{x ≥ 0, Σx ≤ 1}` mapped to mean 0 and covariance I.
fn isotropic_simplex_vertices(n: usize) -> Vec<Vec<f64>> {
    let nf = n as f64;
    let d = (nf + 1.0).powi(2) * (nf + 2.0);
    let a = (d / (nf + 1.0)).sqrt();
    let b = d.sqrt();
    let mean = 1.0 / (nf + 1.0);
    let mut corners = vec![vec![0.0; n]];
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        corners.push(e);
    }
    corners
        .into_iter()
        .map(|v| {
            let y: Vec<f64> = v.iter().map(|x| x - mean).collect();
            let s: f64 = y.iter().sum();
            // √(D/(n+1))·(I - J/n)·y + √D·(J/n)·y
            y.iter().map(|yi| a * (yi - s / nf) + b * s / nf).collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub enum Body {
    Cube,
    Ball,
    Simplex,
    Polytope(Polytope),
}

impl Body {
    pub fn parse(name: &str) -> Option<Body> {
        match name {
            "cube" => Some(Body::Cube),
            "ball" => Some(Body::Ball),
            "simplex" => Some(Body::Simplex),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Body::Cube => "cube",
            Body::Ball => "ball",
            Body::Simplex => "simplex",
            Body::Polytope(_) => "polytope",
        }
    }

    /// The isotropic (covariance I) uniform family, for the named bodies.
    pub fn family(&self, n: usize) -> Option<LogConcaveFamily> {
        match self {
            Body::Cube => Some(LogConcaveFamily::uniform_cube(n)),
            Body::Ball => Some(LogConcaveFamily::uniform_ball(n)),
            Body::Simplex => Some(LogConcaveFamily::uniform_simplex(n)),
            Body::Polytope(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsotropicConstant {
    pub body: String,
    pub dimension: usize,
    pub l_k: f64,
    /// `sup f^{1/n}` of the isotropic uniform density.
    pub l_f: f64,
    pub stderr: f64,
    pub method: &'static str,
    /// Volume of the body as given (before normalization).
    pub volume: f64,
    /// `max |Cov/(Tr/n) - I|` entrywise; zero on the exact paths.
    pub anisotropy: f64,
}

/// `L_f` of the isotropic standard Gaussian.
pub fn gaussian_l_f() -> f64 {
    (2.0 * std::f64::consts::PI).powf(-0.5)
}

/// `sup f^{1/n}`, read off the normalized density at the origin.
fn l_f_at_origin(family: &LogConcaveFamily) -> Result<f64> {
    let n = family.dim() as f64;
    Ok((family.log_density_normalized(&vec![0.0; family.dim()])? / n).exp())
}

/// `L_K = det(Σ)^{1/(2n)}·Vol^{-1/n}`, affine invariant, for the standard simplex.
fn simplex_l_k(n: usize) -> f64 {
    let nf = n as f64;
    let d = (nf + 1.0).powi(2) * (nf + 2.0);
    let log_det = (nf - 1.0) * (nf + 1.0).ln() - nf * d.ln();
    let log_vol = -ln_gamma(nf + 1.0);
    (log_det / (2.0 * nf) - log_vol / nf).exp()
}

/// Monte-Carlo volume and second moments of a polytope.
struct BodyMoments {
    volume: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    /// `L_K` per batch.
    batch_l_k: Vec<f64>,
}

fn polytope_moments(poly: &Polytope, budget: usize, seed: u64) -> Result<BodyMoments> {
    let n = poly.dim();
    let per = budget.div_ceil(BATCHES);
    let batches: Vec<Vec<f64>> = (0..BATCHES).into_par_iter().map(|b| poly.draw(per, seed, b as u64)).collect();
    let moments = |pts: &[f64], proposals: usize| -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let count = pts.len() / n;
        if count < 2 {
            return None;
        }
        let volume = poly.box_log_volume().exp() * count as f64 / proposals as f64;
        let mut mean = DVector::zeros(n);
        for x in pts.chunks_exact(n) {
            mean += DVector::from_column_slice(x);
        }
        mean /= count as f64;
        let mut cov = DMatrix::zeros(n, n);
        for x in pts.chunks_exact(n) {
            let y = DVector::from_column_slice(x) - &mean;
            cov += &y * y.transpose();
        }
        cov /= count as f64;
        Some((volume, mean, cov))
    };
    let l_k = |volume: f64, cov: &DMatrix<f64>| (cov.trace() / n as f64).sqrt() / volume.powf(1.0 / n as f64);
    let batch_l_k = batches
        .iter()
        .filter_map(|pts| moments(pts, per))
        .map(|(v, _, c)| l_k(v, &c))
        .collect();
    let all: Vec<f64> = batches.concat();
    let (volume, mean, covariance) =
        moments(&all, per * BATCHES).ok_or_else(|| Error::ZeroHits { what: "polytope interior".into() })?;
    Ok(BodyMoments { volume, mean, covariance, batch_l_k })
}

fn anisotropy(cov: &DMatrix<f64>) -> f64 {
    let n = cov.nrows();
    let scale = cov.trace() / n as f64;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((cov[(i, j)] / scale - target).abs());
        }
    }
    worst
}

/// `L_K` of the body scaled to volume 1: exact for cube, ball and simplex,
/// Monte Carlo for a polytope, which must already be in isotropic position
/// up to scale (see [`whiten_polytope`]).
pub fn isotropic_constant(body: &Body, n: usize, budget: usize, tolerance: f64, seed: u64) -> Result<IsotropicConstant> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let nf = n as f64;
    let exact = |l_k: f64, volume: f64, family: LogConcaveFamily| -> Result<IsotropicConstant> {
        Ok(IsotropicConstant {
            body: body.name().to_string(),
            dimension: n,
            l_k,
            l_f: l_f_at_origin(&family)?,
            stderr: 0.0,
            method: "exact",
            volume,
            anisotropy: 0.0,
        })
    };
    match body {
        Body::Cube => exact(1.0 / 12f64.sqrt(), 1.0, LogConcaveFamily::uniform_cube(n)),
        Body::Ball => {
            // Volume-1 ball: r = ω_n^{-1/n}, Cov = r²/(n+2)·I.
            let r = (-log_ball_volume(n, 1.0) / nf).exp();
            exact(r / (nf + 2.0).sqrt(), 1.0, LogConcaveFamily::uniform_ball(n))
        }
        Body::Simplex => exact(simplex_l_k(n), (-ln_gamma(nf + 1.0)).exp(), LogConcaveFamily::uniform_simplex(n)),
        Body::Polytope(poly) => {
            if poly.dim() != n {
                return Err(Error::InvalidArgument(format!("polytope lives in ℝ^{}, not ℝ^{n}", poly.dim())));
            }
            let m = polytope_moments(poly, budget, seed)?;
            let a = anisotropy(&m.covariance);
            if a > tolerance {
                return Err(Error::NotIsotropic { anisotropy: a });
            }
            let l_k = (m.covariance.trace() / nf).sqrt() / m.volume.powf(1.0 / nf);
            let (_, se) = mean_stderr(&m.batch_l_k);
            // Density of the covariance-I copy: 1/(Vol·s^n) with s = 1/√(Tr/n).
            let s = (m.covariance.trace() / nf).sqrt().recip();
            let l_f = (-(m.volume.ln() + nf * s.ln()) / nf).exp();
            Ok(IsotropicConstant {
                body: body.name().to_string(),
                dimension: n,
                l_k,
                l_f,
                stderr: se,
                method: "monte_carlo",
                volume: m.volume,
                anisotropy: a,
            })
        }
    }
}

/// Vertices mapped by `x ↦ Σ^{-1/2}(x - barycenter)` with Monte-Carlo moments.
pub fn whiten_polytope(poly: &Polytope, budget: usize, seed: u64) -> Result<Polytope> {
    let m = polytope_moments(poly, budget, seed)?;
    let w = linalg::inverse_sqrt(&m.covariance)?;
    let vertices = poly
        .vertices
        .iter()
        .map(|v| linalg::to_vec(&(&w * (DVector::from_column_slice(v) - &m.mean))))
        .collect();
    Polytope::new(vertices)
}

/// Area of `[-a, a]² ∩ B(0, r)`.
pub fn square_disc_area(a: f64, r: f64) -> f64 {
    if r <= a {
        return std::f64::consts::PI * r * r;
    }
    if r * r >= 2.0 * a * a {
        return 4.0 * a * a;
    }
    // One quadrant: full-height strip up to x₀, then the arc.
    let x0 = (r * r - a * a).sqrt();
    let f = |x: f64| 0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).asin());
    4.0 * (a * x0 + f(a) - f(x0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlicingRow {
    pub epsilon: f64,
    /// `L_K·√(εn)` in volume-1 units.
    pub radius: f64,
    pub volume: f64,
    pub volume_stderr: f64,
    pub volume_ci: (f64, f64),
    /// Small-ball estimate of the isotropic uniform measure at `√(εn)`.
    pub small_ball: f64,
    pub small_ball_ci: (f64, f64),
    /// `(C''·√ε)ⁿ`.
    pub reference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlicingReport {
    pub body: String,
    pub dimension: usize,
    pub l_k: f64,
    pub circumradius: f64,
    pub c_double_prime: f64,
    pub rows: Vec<SlicingRow>,
    pub monotone: bool,
    pub note: &'static str,
}

pub const M_POSITION_NOTE: &str = "intersection volumes are reported; the M-position lower bound is not asserted";

/// `Vol(K ∩ L_K√(εn)·B)` for the volume-1 isotropic body over an ε grid.
pub fn slicing_report(
    body: &Body,
    n: usize,
    epsilons: &[f64],
    budget: usize,
    c_double_prime: f64,
    tolerance: f64,
    seed: u64,
) -> Result<SlicingReport> {
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("ε grid must be positive".into()));
    }
    let nf = n as f64;
    let iso = isotropic_constant(body, n, budget, tolerance, rng::derive_seed(seed, &[0]))?;
    let radii: Vec<f64> = epsilons.iter().map(|e| (e * nf).sqrt()).collect();
    // Squared distances of covariance-I points from two independent streams.
    let (volume_points, ball_points, circumradius): (Vec<f64>, Vec<f64>, f64) = match body {
        Body::Polytope(poly) => {
            let m = polytope_moments(poly, budget, rng::derive_seed(seed, &[1]))?;
            let s = (m.covariance.trace() / nf).sqrt();
            let dist = |pts: Vec<f64>| -> Vec<f64> {
                pts.chunks_exact(n)
                    .map(|x| x.iter().zip(m.mean.iter()).map(|(a, b)| ((a - b) / s).powi(2)).sum())
                    .collect()
            };
            let per = budget.div_ceil(BATCHES);
            let first: Vec<f64> = (0..BATCHES).flat_map(|b| poly.draw(per, rng::derive_seed(seed, &[2]), b as u64)).collect();
            let second: Vec<f64> = (0..BATCHES).flat_map(|b| poly.draw(per, rng::derive_seed(seed, &[3]), b as u64)).collect();
            let circ = poly
                .vertices
                .iter()
                .map(|v| v.iter().zip(m.mean.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
                / m.volume.powf(1.0 / nf);
            (dist(first), dist(second), circ)
        }
        _ => {
            let family = body.family(n).expect("named body");
            let pts = family.sample(budget, rng::derive_seed(seed, &[2]))?;
            let d: Vec<f64> = pts.rows().map(linalg::norm_sq).collect();
            let circ = family.support_radius().expect("bounded body") * iso.l_k;
            (d, Vec::new(), circ)
        }
    };
    let small_ball: Vec<(f64, (f64, f64))> = match body {
        Body::Polytope(_) => {
            let total = ball_points.len() as u64;
            radii
                .iter()
                .map(|r| {
                    let hits = ball_points.iter().filter(|&&d| d <= r * r).count() as u64;
                    (hits as f64 / total as f64, wilson_interval(hits, total))
                })
                .collect()
        }
        _ => {
            let family = body.family(n).expect("named body");
            small_ball_profile(&family, &DVector::zeros(n), &radii, budget, rng::derive_seed(seed, &[3]))?
                .into_iter()
                .map(|e| (e.p_hat, (e.ci_low, e.ci_high)))
                .collect()
        }
    };
    let total = volume_points.len() as u64;
    if total == 0 {
        return Err(Error::ZeroHits { what: "body interior".into() });
    }
    let rows: Vec<SlicingRow> = epsilons
        .iter()
        .zip(&radii)
        .zip(small_ball)
        .map(|((&epsilon, &r), (sb, sb_ci))| {
            let hits = volume_points.iter().filter(|&&d| d <= r * r).count() as u64;
            let volume = hits as f64 / total as f64;
            SlicingRow {
                epsilon,
                radius: iso.l_k * r,
                volume,
                volume_stderr: (volume * (1.0 - volume) / total as f64).sqrt(),
                volume_ci: wilson_interval(hits, total),
                small_ball: sb,
                small_ball_ci: sb_ci,
                reference: (c_double_prime * epsilon.sqrt()).powf(nf),
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].epsilon.total_cmp(&rows[b].epsilon));
    let monotone = order.windows(2).all(|w| rows[w[0]].volume <= rows[w[1]].volume);
    Ok(SlicingReport {
        body: body.name().to_string(),
        dimension: n,
        l_k: iso.l_k,
        circumradius,
        c_double_prime,
        rows,
        monotone,
        note: M_POSITION_NOTE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cube_facets() {
        assert_eq!(Polytope::cube(3).unwrap().facet_count(), 6);
        assert_eq!(Polytope::simplex(3).unwrap().facet_count(), 4);
    }

    #[test]
    fn isotropic_simplex_vertices_are_centered() {
        let v = isotropic_simplex_vertices(4);
        for c in 0..4 {
            assert_abs_diff_eq!(v.iter().map(|x| x[c]).sum::<f64>(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn simplex_l_k_in_one_dimension() {
        // A unit segment.
        assert_abs_diff_eq!(simplex_l_k(1), 1.0 / 12f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn square_disc_limits() {
        assert_abs_diff_eq!(square_disc_area(1.0, 0.5), std::f64::consts::PI * 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(square_disc_area(1.0, 2.0), 4.0, epsilon = 1e-15);
        // Continuity at both transitions.
        assert_abs_diff_eq!(square_disc_area(1.0, 1.0 + 1e-12), std::f64::consts::PI, epsilon = 1e-6);
        assert_abs_diff_eq!(square_disc_area(1.0, 2f64.sqrt() - 1e-12), 4.0, epsilon = 1e-5);
    }

    #[test]
    fn anisotropic_polytope_rejected() {
        let stretched = Polytope::new(vec![vec![-3.0, -1.0], vec![3.0, -1.0], vec![3.0, 1.0], vec![-3.0, 1.0]]).unwrap();
        let err = isotropic_constant(&Body::Polytope(stretched), 2, 20_000, 0.05, 1).unwrap_err();
        assert!(matches!(err, Error::NotIsotropic { .. }));
    }
}
