//! Stochastic localization driven by the tilt SDE `dθ = a_{t,θ} dt + dB`.
//!
//! The localized measure at time `t` is never discretized; it is carried by
//! its parameters `(t, θ)`, with density `∝ exp(-t|x|²/2 + θ·x) f(x)`.
//! Its barycenter and covariance come from one of three backends:
//!
//! * `ClosedForm`: Gaussian conjugacy, for Gaussian (and affinely mapped
//!   Gaussian) families.
//! * `Quadrature`: coordinate-product families. The tilt factorizes, so the
//!   moments are per-coordinate one-dimensional integrals and the
//!   off-diagonal covariance entries vanish.
//! * `Sampling`: self-normalized importance sampling from the base family,
//!   legal for every family with a sampler.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Factor1d, LogConcaveFamily, Moments, Points, CHUNK};
use crate::quadrature;
use crate::rng::{self, tag};

/// Absolute tolerance of every one-dimensional tilted integral.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Importance sampling fails when ESS drops below `budget / ESS_DIVISOR`.
pub const ESS_DIVISOR: f64 = 100.0;
/// Integrands are truncated where they fall `e^{-TRUNCATION}` below their peak.
const TRUNCATION: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    ClosedForm,
    Quadrature,
    Sampling,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::ClosedForm => "closed_form",
            Backend::Quadrature => "quadrature",
            Backend::Sampling => "sampling",
        }
    }

    pub fn parse(s: &str) -> Option<Backend> {
        Some(match s {
            "closed_form" | "closed" => Backend::ClosedForm,
            "quadrature" | "quad" => Backend::Quadrature,
            "sampling" | "is" => Backend::Sampling,
            _ => return None,
        })
    }

    /// The most accurate backend legal for `family`.
    pub fn preferred(family: &LogConcaveFamily) -> Backend {
        if family.gaussian_parameters().is_some() {
            Backend::ClosedForm
        } else if family.product_factor().is_some() {
            Backend::Quadrature
        } else {
            Backend::Sampling
        }
    }

    pub fn is_legal(self, family: &LogConcaveFamily) -> bool {
        match self {
            Backend::ClosedForm => family.gaussian_parameters().is_some(),
            Backend::Quadrature => family.product_factor().is_some(),
            Backend::Sampling => true,
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters `(t, θ)` of the localized measure.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltState {
    pub t: f64,
    pub theta: DVector<f64>,
}

impl TiltState {
    pub fn origin(n: usize) -> Self {
        TiltState { t: 0.0, theta: DVector::zeros(n) }
    }

    pub fn new(t: f64, theta: DVector<f64>) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("tilt time must be nonnegative, got {t}")));
        }
        Ok(TiltState { t, theta })
    }

    pub fn from_slice(t: f64, theta: &[f64]) -> Result<Self> {
        Self::new(t, DVector::from_column_slice(theta))
    }

    #[inline]
    pub fn log_weight(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        let mut q = 0.0;
        for (xi, ti) in x.iter().zip(self.theta.iter()) {
            s += ti * xi;
            q += xi * xi;
        }
        s - 0.5 * self.t * q
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub backend: Backend,
    /// Effective sample size `(Σw)²/Σw²` (sampling backend).
    pub ess: Option<f64>,
    /// Summed quadrature error estimate (quadrature backend).
    pub quadrature_error: Option<f64>,
    /// Norm of the per-coordinate standard errors of the barycenter (sampling backend).
    pub drift_stderr: Option<f64>,
}

/// Barycenter `a_{t,θ}` and covariance `A_{t,θ}` of the localized measure.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltedMoments {
    pub barycenter: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub diagnostics: Diagnostics,
}

impl TiltedMoments {
    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }

    pub fn lambda_max(&self) -> f64 {
        crate::linalg::lambda_max(&self.covariance)
    }

    pub fn spectrum(&self) -> Vec<f64> {
        crate::linalg::eigenvalues_desc(&self.covariance)
    }
}

fn check_backend(family: &LogConcaveFamily, backend: Backend) -> Result<()> {
    if backend.is_legal(family) {
        Ok(())
    } else {
        Err(Error::BackendUnsupported { backend: backend.to_string(), family: family.name().to_string() })
    }
}

fn check_dim(family: &LogConcaveFamily, state: &TiltState) -> Result<()> {
    if state.theta.len() != family.dim() {
        return Err(Error::InvalidArgument(format!(
            "tilt of dimension {} for a family of dimension {}",
            state.theta.len(),
            family.dim()
        )));
    }
    Ok(())
}

/// Barycenter and covariance of `f_{t,θ}`.
pub fn tilted_moments(
    family: &LogConcaveFamily,
    state: &TiltState,
    backend: Backend,
    budget: usize,
    seed: u64,
) -> Result<TiltedMoments> {
    check_backend(family, backend)?;
    check_dim(family, state)?;
    match backend {
        Backend::ClosedForm => {
            let params = family.gaussian_parameters().expect("checked legal");
            Ok(closed_form(&params, state, family.kind_tag() == crate::measures::KindTag::Gaussian))
        }
        Backend::Quadrature => {
            let factor = family.product_factor().expect("checked legal");
            quadrature_moments(factor, state)
        }
        Backend::Sampling => sampling_moments(family, state, budget, seed),
    }
}

fn closed_form(params: &Moments, state: &TiltState, standard: bool) -> TiltedMoments {
    let n = state.theta.len();
    let (barycenter, covariance) = if standard {
        let s = 1.0 / (1.0 + state.t);
        (&state.theta * s, DMatrix::identity(n, n) * s)
    } else {
        // Precision Σ⁻¹ + tI; mean A(Σ⁻¹μ + θ).
        let prec = params.covariance.clone().try_inverse().expect("invertible Gaussian covariance");
        let tilted_prec = &prec + DMatrix::identity(n, n) * state.t;
        let cov = tilted_prec.try_inverse().expect("positive definite precision");
        let cov = crate::linalg::symmetrized(&cov);
        let mean = &cov * (&prec * &params.mean + &state.theta);
        (mean, cov)
    };
    TiltedMoments {
        barycenter,
        covariance,
        diagnostics: Diagnostics { backend: Backend::ClosedForm, ess: None, quadrature_error: None, drift_stderr: None },
    }
}

/// Exponent `q2·x² + q1·x` on `[lo, hi]`.
#[derive(Clone, Copy, Debug)]
struct Piece {
    lo: f64,
    hi: f64,
    q2: f64,
    q1: f64,
}

impl Piece {
    fn eval(&self, x: f64) -> f64 {
        (self.q2 * x + self.q1) * x
    }

    /// `(argmax, max)` over the piece; `None` when the exponent is unbounded.
    fn peak(&self) -> Option<(f64, f64)> {
        let x = if self.q2 < 0.0 {
            (-self.q1 / (2.0 * self.q2)).clamp(self.lo, self.hi)
        } else if self.q1 > 0.0 {
            self.hi
        } else if self.q1 < 0.0 {
            self.lo
        } else if self.lo.is_finite() {
            self.lo
        } else {
            return None;
        };
        x.is_finite().then(|| (x, self.eval(x)))
    }

    /// Finite sub-interval outside of which the exponent is below `level`.
    fn truncated(&self, level: f64) -> (f64, f64) {
        let (lo_root, hi_root) = if self.q2 < 0.0 {
            let disc = (self.q1 * self.q1 + 4.0 * self.q2 * level).max(0.0).sqrt();
            let r1 = (-self.q1 + disc) / (2.0 * self.q2);
            let r2 = (-self.q1 - disc) / (2.0 * self.q2);
            (r1.min(r2), r1.max(r2))
        } else if self.q1 > 0.0 {
            (level / self.q1, f64::INFINITY)
        } else if self.q1 == 0.0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, level / self.q1)
        };
        (self.lo.max(lo_root), self.hi.min(hi_root))
    }
}

fn factor_pieces(factor: Factor1d, t: f64, theta: f64) -> Vec<Piece> {
    let inf = f64::INFINITY;
    match factor {
        Factor1d::Gaussian => vec![Piece { lo: -inf, hi: inf, q2: -0.5 * (1.0 + t), q1: theta }],
        Factor1d::Uniform { half_width } => {
            vec![Piece { lo: -half_width, hi: half_width, q2: -0.5 * t, q1: theta }]
        }
        Factor1d::Laplace { rate } => vec![
            Piece { lo: -inf, hi: 0.0, q2: -0.5 * t, q1: theta + rate },
            Piece { lo: 0.0, hi: inf, q2: -0.5 * t, q1: theta - rate },
        ],
    }
}

/// Tilted one-dimensional integrals `∫ e^{g(x)-g*} (x-c)^k dx`, k = 0, 1, 2,
/// restricted to `window`, with `c` the location of the peak.
struct FactorIntegrals {
    values: [f64; 3],
    center: f64,
    error: f64,
}

fn factor_integrals(factor: Factor1d, t: f64, theta: f64, window: (f64, f64)) -> Result<FactorIntegrals> {
    let pieces = factor_pieces(factor, t, theta);
    let mut best: Option<(f64, f64)> = None;
    for p in &pieces {
        let (x, g) = p.peak().ok_or_else(|| {
            Error::InvalidArgument(format!("tilt (t={t}, θ={theta}) is not integrable against {factor:?}"))
        })?;
        if best.is_none_or(|(_, bg)| g > bg) {
            best = Some((x, g));
        }
    }
    let (center, peak) = best.expect("at least one piece");
    let level = peak - TRUNCATION;
    let mut values = [0.0; 3];
    let mut error = 0.0;
    for p in &pieces {
        let (_, g) = p.peak().expect("checked above");
        if g < level {
            continue;
        }
        let (lo, hi) = p.truncated(level);
        let (lo, hi) = (lo.max(window.0), hi.min(window.1));
        if hi <= lo {
            continue;
        }
        let q = quadrature::integrate(
            |x| {
                let e = (p.eval(x) - peak).exp();
                let y = x - center;
                [e, e * y, e * y * y]
            },
            lo,
            hi,
            QUADRATURE_TOL,
        )?;
        for k in 0..3 {
            values[k] += q.value[k];
        }
        error += q.error;
    }
    Ok(FactorIntegrals { values, center, error })
}

/// Mean and variance of one tilted coordinate factor, plus the error estimate.
pub fn tilted_factor_moments(factor: Factor1d, t: f64, theta: f64) -> Result<(f64, f64, f64)> {
    let fi = factor_integrals(factor, t, theta, (f64::NEG_INFINITY, f64::INFINITY))?;
    let [z, m1, m2] = fi.values;
    let shift = m1 / z;
    let var = (m2 / z - shift * shift).max(0.0);
    Ok((fi.center + shift, var, fi.error / z))
}

fn quadrature_moments(factor: Factor1d, state: &TiltState) -> Result<TiltedMoments> {
    let n = state.theta.len();
    let mut barycenter = DVector::zeros(n);
    let mut covariance = DMatrix::zeros(n, n);
    let mut error = 0.0;
    for i in 0..n {
        let (m, v, e) = tilted_factor_moments(factor, state.t, state.theta[i])?;
        barycenter[i] = m;
        covariance[(i, i)] = v;
        error += e;
    }
    Ok(TiltedMoments {
        barycenter,
        covariance,
        diagnostics: Diagnostics {
            backend: Backend::Quadrature,
            ess: None,
            quadrature_error: Some(error),
            drift_stderr: None,
        },
    })
}

/// Weighted sums relative to a running maximum log-weight, mergeable across chunks.
#[derive(Clone, Debug)]
struct WeightedSums {
    max_log: f64,
    s0: f64,
    s00: f64,
    s1: Vec<f64>,
    s2: Vec<f64>,
    q1: Vec<f64>,
    q2: Vec<f64>,
}

impl WeightedSums {
    fn empty(dim: usize) -> Self {
        WeightedSums {
            max_log: f64::NEG_INFINITY,
            s0: 0.0,
            s00: 0.0,
            s1: vec![0.0; dim],
            s2: vec![0.0; dim * dim],
            q1: vec![0.0; dim],
            q2: vec![0.0; dim],
        }
    }

    fn from_points(points: &Points, state: &TiltState) -> Self {
        let n = points.dim();
        let log_w: Vec<f64> = points.rows().map(|x| state.log_weight(x)).collect();
        let mut acc = WeightedSums::empty(n);
        acc.max_log = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (x, lw) in points.rows().zip(&log_w) {
            let w = (lw - acc.max_log).exp();
            let w2 = w * w;
            acc.s0 += w;
            acc.s00 += w2;
            for i in 0..n {
                acc.s1[i] += w * x[i];
                acc.q1[i] += w2 * x[i];
                acc.q2[i] += w2 * x[i] * x[i];
                for j in 0..=i {
                    acc.s2[i * n + j] += w * x[i] * x[j];
                }
            }
        }
        acc
    }

    fn merge(mut self, other: WeightedSums) -> Self {
        if other.max_log == f64::NEG_INFINITY {
            return self;
        }
        if self.max_log < other.max_log {
            return other.merge(self);
        }
        let r = (other.max_log - self.max_log).exp();
        let r2 = r * r;
        self.s0 += r * other.s0;
        self.s00 += r2 * other.s00;
        for (a, b) in self.s1.iter_mut().zip(&other.s1) {
            *a += r * b;
        }
        for (a, b) in self.s2.iter_mut().zip(&other.s2) {
            *a += r * b;
        }
        for (a, b) in self.q1.iter_mut().zip(&other.q1) {
            *a += r2 * b;
        }
        for (a, b) in self.q2.iter_mut().zip(&other.q2) {
            *a += r2 * b;
        }
        self
    }

    fn ess(&self) -> f64 {
        self.s0 * self.s0 / self.s00
    }
}

fn sampling_moments(family: &LogConcaveFamily, state: &TiltState, budget: usize, seed: u64) -> Result<TiltedMoments> {
    let n = family.dim();
    let acc = family
        .sample_chunks(budget, seed, |p| WeightedSums::from_points(p, state))?
        .into_iter()
        .fold(WeightedSums::empty(n), WeightedSums::merge);
    let ess = acc.ess();
    let threshold = budget as f64 / ESS_DIVISOR;
    if !(ess >= threshold) {
        return Err(Error::LowEss { ess, threshold, budget });
    }
    let a: Vec<f64> = acc.s1.iter().map(|s| s / acc.s0).collect();
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = acc.s2[i * n + j] / acc.s0 - a[i] * a[j];
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    // Delta-method variance of a self-normalized mean: Σw²(x-a)² / (Σw)².
    let drift_var: f64 = (0..n)
        .map(|i| (acc.q2[i] - 2.0 * a[i] * acc.q1[i] + a[i] * a[i] * acc.s00).max(0.0) / (acc.s0 * acc.s0))
        .sum();
    Ok(TiltedMoments {
        barycenter: DVector::from_vec(a),
        covariance: cov,
        diagnostics: Diagnostics {
            backend: Backend::Sampling,
            ess: Some(ess),
            quadrature_error: None,
            drift_stderr: Some(drift_var.sqrt()),
        },
    })
}

/// Euler–Maruyama update with a precomputed drift.
pub fn advance(state: &TiltState, barycenter: &DVector<f64>, dt: f64, noise: &DVector<f64>) -> TiltState {
    TiltState { t: state.t + dt, theta: &state.theta + barycenter * dt + noise }
}

/// One Euler–Maruyama step `θ' = θ + a_{t,θ} dt + noise`, `t' = t + dt`.
pub fn step(
    family: &LogConcaveFamily,
    state: &TiltState,
    dt: f64,
    noise: &DVector<f64>,
    backend: Backend,
    budget: usize,
    seed: u64,
) -> Result<TiltState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if noise.len() != family.dim() {
        return Err(Error::InvalidArgument("noise dimension mismatch".into()));
    }
    let m = tilted_moments(family, state, backend, budget, seed)?;
    Ok(advance(state, &m.barycenter, dt, noise))
}

/// Brownian increment `√dt·Z` for step `index` of the path with seed `seed`.
pub fn brownian_increment(n: usize, dt: f64, seed: u64, index: u64) -> DVector<f64> {
    let mut rng = rng::stream(seed, &[tag::NOISE, index]);
    let s = dt.sqrt();
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        s * z
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub horizon: f64,
    pub dt: f64,
    pub backend: Backend,
    pub budget: usize,
    pub record_every: usize,
}

impl PathConfig {
    pub fn new(horizon: f64, dt: f64, backend: Backend) -> Self {
        PathConfig { horizon, dt, backend, budget: 100_000, record_every: 1 }
    }

    pub fn budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    /// Number of Euler steps; `horizon/dt` rounded to the nearest integer.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.dt > 0.0 && self.dt <= self.horizon * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < dt ≤ T, got dt={} T={}",
                self.dt, self.horizon
            )));
        }
        if self.budget == 0 {
            return Err(Error::InvalidArgument("budget must be positive".into()));
        }
        Ok(())
    }
}

/// A discretized localization trajectory with the moments at each record point.
#[derive(Clone, Debug)]
pub struct LocalizationPath {
    pub times: Vec<f64>,
    pub states: Vec<TiltState>,
    pub moments: Vec<TiltedMoments>,
    pub seed: u64,
    pub family: String,
}

impl LocalizationPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the record point closest to `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some(i)
    }

    pub fn last(&self) -> (&TiltState, &TiltedMoments) {
        (self.states.last().expect("nonempty"), self.moments.last().expect("nonempty"))
    }
}

/// Run the tilt SDE from `(0, 0)` to the horizon, recording every
/// `record_every` steps and always at the final time.
pub fn run_path(family: &LogConcaveFamily, config: &PathConfig, seed: u64) -> Result<LocalizationPath> {
    config.validate()?;
    check_backend(family, config.backend)?;
    let n = family.dim();
    let steps = config.steps();
    let mut state = TiltState::origin(n);
    let mut path = LocalizationPath {
        times: Vec::new(),
        states: Vec::new(),
        moments: Vec::new(),
        seed,
        family: family.name().to_string(),
    };
    for k in 0..=steps {
        let moments_seed = rng::derive_seed(seed, &[tag::MOMENTS, k as u64]);
        let m = tilted_moments(family, &state, config.backend, config.budget, moments_seed)?;
        if k % config.record_every == 0 || k == steps {
            path.times.push(state.t);
            path.states.push(state.clone());
            path.moments.push(m.clone());
        }
        if k == steps {
            break;
        }
        let noise = brownian_increment(n, config.dt, seed, k as u64);
        let next = advance(&state, &m.barycenter, config.dt, &noise);
        // Times are k·dt, not accumulated sums.
        state = TiltState { t: (k + 1) as f64 * config.dt, theta: next.theta };
    }
    Ok(path)
}

pub fn path_seed(seed: u64, index: usize) -> u64 {
    rng::derive_seed(seed, &[tag::PATH, index as u64])
}

/// `paths` independent trajectories, run in parallel and returned in index order.
pub fn run_ensemble(
    family: &LogConcaveFamily,
    config: &PathConfig,
    paths: usize,
    seed: u64,
) -> Vec<Result<LocalizationPath>> {
    (0..paths)
        .into_par_iter()
        .map(|i| run_path(family, config, path_seed(seed, i)))
        .collect()
}

/// A registered region shape.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Whole,
    /// Closed ball `B(center, radius)`.
    Ball { center: DVector<f64>, radius: f64 },
    /// `{x : x·normal ≥ offset}`.
    Halfspace { normal: DVector<f64>, offset: f64 },
}

impl Region {
    pub fn centered_ball(n: usize, radius: f64) -> Self {
        Region::Ball { center: DVector::zeros(n), radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Whole => true,
            Region::Ball { center, radius } => {
                x.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= radius * radius
            }
            Region::Halfspace { normal, offset } => {
                x.iter().zip(normal.iter()).map(|(a, b)| a * b).sum::<f64>() >= *offset
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Region::Whole => "whole".into(),
            Region::Ball { center, radius } => {
                if center.iter().all(|&c| c == 0.0) {
                    format!("ball(0,{radius})")
                } else {
                    format!("ball(y,{radius})")
                }
            }
            Region::Halfspace { offset, .. } => format!("halfspace({offset})"),
        }
    }

    /// `(coordinate, sign)` when the region is a coordinate-aligned halfspace.
    fn aligned_halfspace(&self) -> Option<(usize, f64, f64)> {
        let Region::Halfspace { normal, offset } = self else { return None };
        let nonzero: Vec<usize> = (0..normal.len()).filter(|&i| normal[i] != 0.0).collect();
        match nonzero.as_slice() {
            [i] => Some((*i, normal[*i], *offset)),
            _ => None,
        }
    }
}

/// `log P(Z > x)` for standard normal `Z`, with an asymptotic tail past 30.
fn log_normal_sf(x: f64) -> f64 {
    if x < 30.0 {
        (0.5 * erfc(x / std::f64::consts::SQRT_2)).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (x * (2.0 * std::f64::consts::PI).sqrt()).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Standard normal conditioned on `[a, b]`.
fn standard_truncated_normal<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b <= 0.0 {
        return -standard_truncated_normal(-b, -a, rng);
    }
    let u: f64 = rng.random();
    if a >= 0.0 {
        let qa = 0.5 * erfc(a / std::f64::consts::SQRT_2);
        if qa < 1e-300 {
            // Exponential proposal above `a`.
            loop {
                let z = a - rng.random::<f64>().ln() / a;
                if z <= b && rng.random::<f64>() <= (-0.5 * (z - a) * (z - a)).exp() {
                    return z;
                }
            }
        }
        let qb = 0.5 * erfc(b / std::f64::consts::SQRT_2);
        let q = qa - u * (qa - qb);
        return (std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)).clamp(a, b);
    }
    let pa = 0.5 * erfc(-a / std::f64::consts::SQRT_2);
    let pb = 0.5 * erfc(-b / std::f64::consts::SQRT_2);
    let p = pa + u * (pb - pa);
    (-std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)).clamp(a, b)
}

/// `N(mean, 1/precision)` conditioned on `[lo, hi]`.
fn truncated_normal<R: Rng + ?Sized>(mean: f64, precision: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let s = precision.sqrt();
    mean + standard_truncated_normal((lo - mean) * s, (hi - mean) * s, rng) / s
}

/// One draw from the tilted factor `∝ exp(-t x²/2 + θx)·f(x)`.
pub fn sample_tilted_factor<R: Rng + ?Sized>(factor: Factor1d, t: f64, theta: f64, rng: &mut R) -> Result<f64> {
    Ok(match factor {
        Factor1d::Gaussian => {
            let z: f64 = StandardNormal.sample(rng);
            theta / (1.0 + t) + z / (1.0 + t).sqrt()
        }
        Factor1d::Uniform { half_width: h } => {
            if t > 0.0 {
                truncated_normal(theta / t, t, -h, h, rng)
            } else if theta == 0.0 {
                rng.random_range(-h..=h)
            } else {
                // Inverse CDF of the exponential tilt on [-h, h].
                let u: f64 = rng.random();
                let k = theta.abs();
                let x = h + (u + (1.0 - u) * (-2.0 * k * h).exp()).ln() / k;
                if theta > 0.0 { x } else { -x }
            }
        }
        Factor1d::Laplace { rate: b } => {
            let (up, down) = (theta - b, theta + b);
            if t > 0.0 {
                // Gaussian pieces N(up/t, 1/t) on x > 0 and N(down/t, 1/t) on x < 0.
                let rt = t.sqrt();
                let log_pos = up * up / (2.0 * t) + log_normal_sf(-up / rt);
                let log_neg = down * down / (2.0 * t) + log_normal_sf(down / rt);
                let p_pos = 1.0 / (1.0 + (log_neg - log_pos).exp());
                if rng.random::<f64>() < p_pos {
                    truncated_normal(up / t, t, 0.0, f64::INFINITY, rng)
                } else {
                    truncated_normal(down / t, t, f64::NEG_INFINITY, 0.0, rng)
                }
            } else {
                if !(theta.abs() < b) {
                    return Err(Error::InvalidArgument(format!("tilt θ={theta} is not integrable against rate {b}")));
                }
                // Exponential pieces with rates b - θ and b + θ.
                let p_pos = (1.0 / -up) / (1.0 / -up + 1.0 / down);
                let e: f64 = -rng.random::<f64>().ln();
                if rng.random::<f64>() < p_pos {
                    e / -up
                } else {
                    -e / down
                }
            }
        }
    })
}

/// `count` exact draws from `f_{t,θ}` for a coordinate-product family.
pub fn sample_tilted_product(family: &LogConcaveFamily, state: &TiltState, count: usize, seed: u64) -> Result<Points> {
    check_dim(family, state)?;
    let factor = family
        .product_factor()
        .ok_or_else(|| Error::BackendUnsupported { backend: "exact tilted sampling".into(), family: family.name().into() })?;
    let n = family.dim();
    let chunks: Vec<Vec<f64>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(count - c * CHUNK);
            let mut rng = rng::stream(seed, &[tag::SAMPLE, c as u64]);
            let mut data = Vec::with_capacity(len * n);
            for _ in 0..len {
                for i in 0..n {
                    data.push(sample_tilted_factor(factor, state.t, state.theta[i], &mut rng)?);
                }
            }
            Ok(data)
        })
        .collect::<Result<_>>()?;
    Ok(Points::new(n, chunks.concat()))
}

/// An estimated probability with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub p: f64,
    pub stderr: f64,
    pub ess: Option<f64>,
    /// Number of proposals that landed in the region (sampling path).
    pub hits: Option<usize>,
}

#[derive(Clone, Debug)]
struct RegionSums {
    max_log: f64,
    s0: f64,
    s00: f64,
    h: f64,
    hh: f64,
    hits: usize,
}

impl RegionSums {
    fn empty() -> Self {
        RegionSums { max_log: f64::NEG_INFINITY, s0: 0.0, s00: 0.0, h: 0.0, hh: 0.0, hits: 0 }
    }

    fn merge(mut self, o: RegionSums) -> Self {
        if o.max_log == f64::NEG_INFINITY {
            return self;
        }
        if self.max_log < o.max_log {
            return o.merge(self);
        }
        let r = (o.max_log - self.max_log).exp();
        self.s0 += r * o.s0;
        self.s00 += r * r * o.s00;
        self.h += r * o.h;
        self.hh += r * r * o.hh;
        self.hits += o.hits;
        self
    }
}

/// `μ_{t,θ}(S)`. Coordinate-aligned halfspaces of product families use
/// quadrature; other regions of product families use exact draws from the
/// tilted law; every other family uses self-normalized importance sampling
/// from the base family.
pub fn measure_under_tilt(
    family: &LogConcaveFamily,
    state: &TiltState,
    region: &Region,
    budget: usize,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    check_dim(family, state)?;
    if let Region::Whole = region {
        return Ok(ProbabilityEstimate { p: 1.0, stderr: 0.0, ess: None, hits: None });
    }
    if let (Some(factor), Some((i, sign, offset))) = (family.product_factor(), region.aligned_halfspace()) {
        // x_i·sign ≥ offset
        let window = if sign > 0.0 {
            (offset / sign, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, offset / sign)
        };
        let all = factor_integrals(factor, state.t, state.theta[i], (f64::NEG_INFINITY, f64::INFINITY))?;
        let part = factor_integrals(factor, state.t, state.theta[i], window)?;
        let p = (part.values[0] / all.values[0]).clamp(0.0, 1.0);
        return Ok(ProbabilityEstimate { p, stderr: (all.error + part.error) / all.values[0], ess: None, hits: None });
    }
    if family.product_factor().is_some() {
        // Exact draws from the tilted product law: every weight is one.
        let points = sample_tilted_product(family, state, budget, seed)?;
        let hits = points.rows().filter(|x| region.contains(x)).count();
        let p = hits as f64 / budget as f64;
        let stderr = (p * (1.0 - p) / budget as f64).sqrt();
        return Ok(ProbabilityEstimate { p, stderr, ess: Some(budget as f64), hits: Some(hits) });
    }
    let sums = family
        .sample_chunks(budget, seed, |points| {
            let log_w: Vec<f64> = points.rows().map(|x| state.log_weight(x)).collect();
            let max_log = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut acc = RegionSums { max_log, ..RegionSums::empty() };
            for (x, lw) in points.rows().zip(&log_w) {
                let w = (lw - max_log).exp();
                acc.s0 += w;
                acc.s00 += w * w;
                if region.contains(x) {
                    acc.h += w;
                    acc.hh += w * w;
                    acc.hits += 1;
                }
            }
            acc
        })?
        .into_iter()
        .fold(RegionSums::empty(), RegionSums::merge);
    let ess = sums.s0 * sums.s0 / sums.s00;
    let threshold = budget as f64 / ESS_DIVISOR;
    if !(ess >= threshold) {
        return Err(Error::LowEss { ess, threshold, budget });
    }
    let p = sums.h / sums.s0;
    // Σw²(1_S - p)² = Σ_{S} w² (1-p)² + Σ_{Sᶜ} w² p²
    let num = sums.hh * (1.0 - p).powi(2) + (sums.s00 - sums.hh) * p * p;
    Ok(ProbabilityEstimate { p, stderr: num.max(0.0).sqrt() / sums.s0, ess: Some(ess), hits: Some(sums.hits) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_conjugacy() {
        let g = LogConcaveFamily::gaussian(2);
        let s = TiltState::from_slice(1.0, &[1.0, 0.0]).unwrap();
        let m = tilted_moments(&g, &s, Backend::ClosedForm, 0, 0).unwrap();
        assert_abs_diff_eq!(m.barycenter[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.barycenter[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((m.covariance - DMatrix::identity(2, 2) * 0.5).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_matches_gaussian_closed_form() {
        let (m, v, _) = tilted_factor_moments(Factor1d::Gaussian, 0.7, 1.3).unwrap();
        assert_abs_diff_eq!(m, 1.3 / 1.7, epsilon = 1e-9);
        assert_abs_diff_eq!(v, 1.0 / 1.7, epsilon = 1e-9);
    }

    #[test]
    fn identity_tilt_recovers_base_moments() {
        for factor in [
            Factor1d::Gaussian,
            Factor1d::Uniform { half_width: 3f64.sqrt() },
            Factor1d::Laplace { rate: std::f64::consts::SQRT_2 },
        ] {
            let (m, v, _) = tilted_factor_moments(factor, 0.0, 0.0).unwrap();
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn tilted_uniform_mean_closed_form() {
        // t = 0: density ∝ e^{θx} on [-h, h]; mean = h·coth(θh) - 1/θ.
        let h = 3f64.sqrt();
        let theta = 0.8;
        let (m, _, _) = tilted_factor_moments(Factor1d::Uniform { half_width: h }, 0.0, theta).unwrap();
        assert_abs_diff_eq!(m, h / (theta * h).tanh() - 1.0 / theta, epsilon = 1e-9);
    }

    #[test]
    fn non_integrable_tilt_is_rejected() {
        let r = tilted_factor_moments(Factor1d::Laplace { rate: 1.0 }, 0.0, 2.0);
        assert!(r.is_err());
    }

    #[test]
    fn step_examples() {
        let g = LogConcaveFamily::gaussian(2);
        let s = step(&g, &TiltState::origin(2), 0.1, &DVector::zeros(2), Backend::ClosedForm, 0, 0).unwrap();
        assert_abs_diff_eq!(s.t, 0.1);
        assert_eq!(s.theta, DVector::zeros(2));
        let s0 = TiltState::from_slice(1.0, &[1.0, 0.0]).unwrap();
        let noise = DVector::from_vec(vec![0.1, -0.1]);
        let s = step(&g, &s0, 0.2, &noise, Backend::ClosedForm, 0, 0).unwrap();
        assert_abs_diff_eq!(s.theta[0], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.theta[1], -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.t, 1.2, epsilon = 1e-15);
    }

    #[test]
    fn illegal_backend_is_an_error() {
        let ball = LogConcaveFamily::uniform_ball(3);
        let r = tilted_moments(&ball, &TiltState::origin(3), Backend::Quadrature, 10, 0);
        assert!(matches!(r, Err(Error::BackendUnsupported { .. })));
        let cube = LogConcaveFamily::uniform_cube(3);
        assert!(tilted_moments(&cube, &TiltState::origin(3), Backend::ClosedForm, 10, 0).is_err());
    }

    #[test]
    fn low_ess_is_reported() {
        let g = LogConcaveFamily::gaussian(2);
        let s = TiltState::from_slice(0.0, &[8.0, 8.0]).unwrap();
        match tilted_moments(&g, &s, Backend::Sampling, 10_000, 1) {
            Err(Error::LowEss { ess, .. }) => assert!(ess < 100.0),
            other => panic!("expected LowEss, got {other:?}"),
        }
    }

    #[test]
    fn whole_space_has_mass_one() {
        let c = LogConcaveFamily::uniform_cube(3);
        let p = measure_under_tilt(&c, &TiltState::origin(3), &Region::Whole, 10, 0).unwrap();
        assert_eq!(p.p, 1.0);
    }

    #[test]
    fn aligned_halfspace_uses_quadrature() {
        // Tilted standard normal at (0, 2) is N(2, 1): P(x ≥ 0) = Φ(2).
        let g = LogConcaveFamily::gaussian(1);
        let s = TiltState::from_slice(0.0, &[2.0]).unwrap();
        let h = Region::Halfspace { normal: DVector::from_vec(vec![1.0]), offset: 0.0 };
        let p = measure_under_tilt(&g, &s, &h, 10, 0).unwrap();
        assert_abs_diff_eq!(p.p, 0.977_249_868_051_820_8, epsilon = 1e-9);
    }

    #[test]
    fn exact_tilted_draws_match_quadrature_moments() {
        let factors = [
            Factor1d::Gaussian,
            Factor1d::Uniform { half_width: 3f64.sqrt() },
            Factor1d::Laplace { rate: 2f64.sqrt() },
        ];
        let states = [(0.0, 0.5), (0.5, -2.0), (1.0, 6.0), (0.25, 0.0)];
        for factor in factors {
            for (k, &(t, theta)) in states.iter().enumerate() {
                let (mean, var, _) = tilted_factor_moments(factor, t, theta).unwrap();
                let mut rng = rng::stream(11, &[k as u64]);
                let m = 200_000;
                let xs: Vec<f64> = (0..m).map(|_| sample_tilted_factor(factor, t, theta, &mut rng).unwrap()).collect();
                let mu = xs.iter().sum::<f64>() / m as f64;
                let v = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / m as f64;
                let se = (var / m as f64).sqrt();
                assert!((mu - mean).abs() < 5.0 * se, "{factor:?} t={t} θ={theta}: {mu} vs {mean}");
                assert!((v / var - 1.0).abs() < 0.03, "{factor:?} t={t} θ={theta}: {v} vs {var}");
            }
        }
    }

    #[test]
    fn far_tails_stay_in_range() {
        let mut rng = rng::stream(5, &[]);
        for _ in 0..1000 {
            let x = standard_truncated_normal(45.0, f64::INFINITY, &mut rng);
            assert!(x >= 45.0 && x < 46.0);
            let y = standard_truncated_normal(-3.0, -2.5, &mut rng);
            assert!((-3.0..=-2.5).contains(&y));
        }
    }

    #[test]
    fn tilted_ball_mass_matches_normal_oracle() {
        // f_{1,0} of the standard normal is N(0, 1/2): P(|x| ≤ 1) = 2Φ(√2) - 1.
        let g = LogConcaveFamily::gaussian(1);
        let s = TiltState::from_slice(1.0, &[0.0]).unwrap();
        let p = measure_under_tilt(&g, &s, &Region::centered_ball(1, 1.0), 200_000, 2).unwrap();
        let exact = statrs::function::erf::erf(1.0);
        assert!((p.p - exact).abs() < 3.0 * p.stderr, "{} vs {exact}", p.p);
    }
}
