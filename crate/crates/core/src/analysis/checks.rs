//! Ensemble checks of the localization process: martingale conservation,
//! the almost-sure covariance bound, symmetry, shrinkage of small sets, and
//! the trace lower bound at a fixed time.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::localization::{
    measure_under_tilt, run_ensemble, tilted_moments, Backend, LocalizationPath, PathConfig, Region, TiltState,
};
use crate::measures::LogConcaveFamily;
use crate::rng::{self, tag};

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Binomial standard error at proportion `q` over `m` trials.
pub fn binomial_stderr(q: f64, m: usize) -> f64 {
    (q * (1.0 - q) / m as f64).sqrt()
}

/// Successful paths and the errors of the failed ones, in index order.
#[derive(Debug)]
pub struct Ensemble {
    pub paths: Vec<LocalizationPath>,
    pub failures: Vec<(usize, Error)>,
}

pub fn ensemble(family: &LogConcaveFamily, config: &PathConfig, paths: usize, seed: u64) -> Ensemble {
    let mut out = Ensemble { paths: Vec::with_capacity(paths), failures: Vec::new() };
    for (i, r) in run_ensemble(family, config, paths, seed).into_iter().enumerate() {
        match r {
            Ok(p) => out.paths.push(p),
            Err(e) => out.failures.push((i, e)),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `x·e₁`
    FirstCoordinate,
    /// `|x|²`
    SquaredNorm,
    /// `1{|x| ≤ √n}`
    BallIndicator,
}

impl TestFunction {
    pub const ALL: [TestFunction; 3] =
        [TestFunction::FirstCoordinate, TestFunction::SquaredNorm, TestFunction::BallIndicator];

    pub fn as_str(self) -> &'static str {
        match self {
            TestFunction::FirstCoordinate => "x.e1",
            TestFunction::SquaredNorm => "|x|^2",
            TestFunction::BallIndicator => "1{|x|<=sqrt(n)}",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleRow {
    pub function: TestFunction,
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub reference: f64,
    pub reference_stderr: f64,
    /// `|mean - reference|` in combined standard errors.
    pub z: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub family: String,
    pub paths: usize,
    pub failed_paths: usize,
    pub sigmas: f64,
    pub rows: Vec<MartingaleRow>,
    pub pass: bool,
}

/// `E_{μ_t} φ` on one recorded state.
fn functional(
    function: TestFunction,
    family: &LogConcaveFamily,
    state: &TiltState,
    barycenter: &DVector<f64>,
    trace: f64,
    budget: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    Ok(match function {
        TestFunction::FirstCoordinate => (barycenter[0], 0.0),
        TestFunction::SquaredNorm => (trace + barycenter.norm_squared(), 0.0),
        TestFunction::BallIndicator => {
            let n = family.dim();
            let region = Region::centered_ball(n, (n as f64).sqrt());
            let est = measure_under_tilt(family, state, &region, budget, seed)?;
            (est.p, est.stderr)
        }
    })
}

/// Ensemble means of `E_{μ_t} φ` at each `t` against the value at `t = 0`.
///
/// The reference for the ball indicator is a Monte-Carlo estimate with
/// `budget` draws; its error enters the combined standard error.
pub fn martingale_check(
    family: &LogConcaveFamily,
    ensemble: &Ensemble,
    times: &[f64],
    budget: usize,
    sigmas: f64,
    seed: u64,
) -> Result<MartingaleReport> {
    let origin = TiltState::origin(family.dim());
    let m0 = tilted_moments(family, &origin, Backend::preferred(family), budget, rng::derive_seed(seed, &[tag::MOMENTS]))?;
    let mut rows = Vec::new();
    for function in TestFunction::ALL {
        let (reference, reference_stderr) = match (function, family.exact_moments()) {
            (TestFunction::FirstCoordinate, Some(m)) => (m.mean[0], 0.0),
            (TestFunction::SquaredNorm, Some(m)) => (m.covariance.trace() + m.mean.norm_squared(), 0.0),
            _ => functional(
                function,
                family,
                &origin,
                &m0.barycenter,
                m0.trace(),
                budget,
                rng::derive_seed(seed, &[tag::REGION, u64::MAX]),
            )?,
        };
        for &t in times {
            let values: Vec<f64> = ensemble
                .paths
                .par_iter()
                .enumerate()
                .map(|(i, path)| {
                    let k = path.index_at(t).expect("nonempty path");
                    let s = rng::derive_seed(seed, &[tag::REGION, i as u64, t.to_bits()]);
                    let m = &path.moments[k];
                    functional(function, family, &path.states[k], &m.barycenter, m.trace(), budget, s).map(|v| v.0)
                })
                .collect::<Result<_>>()?;
            let (mean, stderr) = mean_stderr(&values);
            let combined = stderr.hypot(reference_stderr);
            let z = if combined > 0.0 { (mean - reference).abs() / combined } else if mean == reference { 0.0 } else { f64::INFINITY };
            rows.push(MartingaleRow { function, t, mean, stderr, reference, reference_stderr, z, pass: z <= sigmas });
        }
    }
    let failed_paths = ensemble.failures.len();
    let pass = failed_paths == 0 && rows.iter().all(|r| r.pass);
    Ok(MartingaleReport { family: family.name().to_string(), paths: ensemble.paths.len(), failed_paths, sigmas, rows, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovBoundReport {
    pub states: usize,
    pub violations: usize,
    /// Largest `λ_max(A_t) - 1/t` over the checked states.
    pub max_excess: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `λ_max(A_t) ≤ 1/t + tolerance` on every recorded state with `t ≥ t_min`.
pub fn covbound_check(paths: &[LocalizationPath], t_min: f64, tolerance: f64) -> CovBoundReport {
    let mut states = 0;
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for path in paths {
        for (t, m) in path.times.iter().zip(&path.moments) {
            if *t <= 0.0 || *t < t_min {
                continue;
            }
            states += 1;
            let excess = m.lambda_max() - 1.0 / t;
            max_excess = max_excess.max(excess);
            if excess > tolerance {
                violations += 1;
            }
        }
    }
    CovBoundReport { states, violations, max_excess, tolerance, pass: violations == 0 }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// `|a_{t,0}|`
    pub centered_norm: f64,
    /// `|a_{t,θ} + a_{t,-θ}|`
    pub odd_norm: f64,
    /// Allowed deviation: `tolerance + sigmas·stderr`.
    pub allowed: f64,
    pub pass: bool,
}

/// Barycenters of a symmetric family: `a_{t,0} = 0` and `a_{t,-θ} = -a_{t,θ}`.
pub fn symmetry_check(
    family: &LogConcaveFamily,
    t: f64,
    theta: &DVector<f64>,
    backend: Backend,
    budget: usize,
    tolerance: f64,
    sigmas: f64,
    seed: u64,
) -> Result<SymmetryReport> {
    if !family.is_symmetric() {
        return Err(Error::InvalidArgument(format!("{} is not symmetric", family.name())));
    }
    let n = family.dim();
    let run = |th: DVector<f64>, k: u64| {
        tilted_moments(family, &TiltState::new(t, th)?, backend, budget, rng::derive_seed(seed, &[k]))
    };
    let zero = run(DVector::zeros(n), 0)?;
    let plus = run(theta.clone(), 1)?;
    let minus = run(-theta, 2)?;
    let se = |m: &crate::localization::TiltedMoments| m.diagnostics.drift_stderr.unwrap_or(0.0);
    let stderr = se(&zero).max(se(&plus).hypot(se(&minus)));
    let centered_norm = zero.barycenter.norm();
    let odd_norm = (&plus.barycenter + &minus.barycenter).norm();
    let allowed = tolerance + sigmas * stderr;
    Ok(SymmetryReport { centered_norm, odd_norm, allowed, pass: centered_norm <= allowed && odd_norm <= allowed })
}

/// Inputs of the shrinkage check.
#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkageSetup {
    pub region: Region,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub lambda: f64,
    pub backend: Backend,
    pub budget: usize,
    /// Draws for the initial mass `g₀`.
    pub initial_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShrinkageReport {
    pub region: String,
    pub diameter: f64,
    pub horizon: f64,
    pub lambda: f64,
    pub g0: f64,
    pub g0_stderr: f64,
    pub paths: usize,
    pub failed_paths: usize,
    /// Ensemble mean of `log(1/g_T)` and its standard error.
    pub mean_log_inverse: f64,
    pub mean_log_inverse_stderr: f64,
    /// `log(1/g₀) + D²T/2`.
    pub integrated_bound: f64,
    pub integrated_pass: bool,
    /// Frequency of `{g₀ ≤ e^{D²T/2}·g_T^{1/λ}}`.
    pub event_frequency: f64,
    pub event_threshold: f64,
    pub event_pass: bool,
}

/// Small sets do not shrink too fast along the localization: checks the
/// integrated inequality for `E log(1/g_T)` and the event
/// `{μ(S) ≤ e^{D²T/2}·μ_T(S)^{1/λ}}` at frequency `1 - 1/λ`.
pub fn shrinkage_check(
    family: &LogConcaveFamily,
    setup: &ShrinkageSetup,
    mean_sigmas: f64,
    binomial_sigmas: f64,
    seed: u64,
) -> Result<ShrinkageReport> {
    let radius = family
        .support_radius()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has unbounded support", family.name())))?;
    if !(setup.lambda > 1.0) {
        return Err(Error::InvalidArgument(format!("λ must exceed 1, got {}", setup.lambda)));
    }
    let diameter = 2.0 * radius;
    let origin = TiltState::origin(family.dim());
    let g0 = measure_under_tilt(family, &origin, &setup.region, setup.initial_samples, rng::derive_seed(seed, &[tag::REGION]))?;
    if g0.hits == Some(0) {
        return Err(Error::ZeroHits { what: format!("initial mass of {}", setup.region.name()) });
    }
    let config = PathConfig::new(setup.horizon, setup.dt, setup.backend).budget(setup.budget).record_every(usize::MAX);
    let ens = ensemble(family, &config, setup.paths, seed);
    let finals: Vec<Result<f64>> = ens
        .paths
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let (state, _) = path.last();
            let s = rng::derive_seed(seed, &[tag::REGION, i as u64]);
            measure_under_tilt(family, state, &setup.region, setup.budget, s).map(|e| e.p)
        })
        .collect();
    let mut failed_paths = ens.failures.len();
    let mut g_t = Vec::with_capacity(finals.len());
    for r in finals {
        match r {
            Ok(g) => g_t.push(g),
            Err(Error::LowEss { .. }) => failed_paths += 1,
            Err(e) => return Err(e),
        }
    }
    let growth = diameter * diameter * setup.horizon / 2.0;
    let logs: Vec<f64> = g_t.iter().map(|g| -g.ln()).collect();
    let (mean_log_inverse, mean_log_inverse_stderr) = mean_stderr(&logs);
    let integrated_bound = -g0.p.ln() + growth;
    let integrated_pass = mean_log_inverse <= integrated_bound + mean_sigmas * mean_log_inverse_stderr;
    let q = 1.0 - 1.0 / setup.lambda;
    let events = g_t.iter().filter(|&&g| g0.p <= growth.exp() * g.powf(1.0 / setup.lambda)).count();
    // Failed paths count against the event.
    let trials = g_t.len() + failed_paths;
    let event_frequency = events as f64 / trials as f64;
    let event_threshold = q - binomial_sigmas * binomial_stderr(q, trials);
    Ok(ShrinkageReport {
        region: setup.region.name(),
        diameter,
        horizon: setup.horizon,
        lambda: setup.lambda,
        g0: g0.p,
        g0_stderr: g0.stderr,
        paths: g_t.len(),
        failed_paths,
        mean_log_inverse,
        mean_log_inverse_stderr,
        integrated_bound,
        integrated_pass,
        event_frequency,
        event_threshold,
        event_pass: event_frequency >= event_threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GuanReport {
    pub family: String,
    pub dimension: usize,
    pub t_star: f64,
    pub paths: usize,
    pub failed_paths: usize,
    pub mean_trace: f64,
    pub stderr: f64,
    /// `n/t*`, from `A_t ≼ I/t`.
    pub upper: f64,
}

impl GuanReport {
    /// Ensemble mean with failed paths counted as trace zero.
    pub fn worst_case_mean(&self) -> f64 {
        self.mean_trace * self.paths as f64 / (self.paths + self.failed_paths) as f64
    }

    /// `worst_case_mean ≥ c·n`.
    pub fn meets(&self, c: f64) -> bool {
        self.worst_case_mean() >= c * self.dimension as f64
    }

    pub fn below_upper(&self) -> bool {
        self.mean_trace <= self.upper
    }
}

/// Ensemble estimate of `E Tr(A_{t*})`.
pub fn guan_trace_check(
    family: &LogConcaveFamily,
    t_star: f64,
    dt: f64,
    paths: usize,
    backend: Backend,
    budget: usize,
    seed: u64,
) -> Result<GuanReport> {
    if !(t_star > 0.0 && t_star <= 1.0) {
        return Err(Error::InvalidArgument(format!("t* must lie in (0,1], got {t_star}")));
    }
    let config = PathConfig::new(t_star, dt, backend).budget(budget).record_every(usize::MAX);
    let mut ens = ensemble(family, &config, paths, seed);
    if let Some(i) = ens.failures.iter().position(|(_, e)| !matches!(e, Error::LowEss { .. })) {
        return Err(ens.failures.swap_remove(i).1);
    }
    let traces: Vec<f64> = ens.paths.iter().map(|p| p.last().1.trace()).collect();
    let (mean_trace, stderr) = mean_stderr(&traces);
    Ok(GuanReport {
        family: family.name().to_string(),
        dimension: family.dim(),
        t_star,
        paths: ens.paths.len(),
        failed_paths: ens.failures.len(),
        mean_trace,
        stderr,
        upper: family.dim() as f64 / t_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stderr_small_cases() {
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn whole_space_shrinkage_is_trivial() {
        let f = LogConcaveFamily::uniform_cube(2);
        let setup = ShrinkageSetup {
            region: Region::Whole,
            horizon: 0.1,
            dt: 0.05,
            paths: 8,
            lambda: 2.0,
            backend: Backend::Quadrature,
            budget: 1000,
            initial_samples: 1000,
        };
        let r = shrinkage_check(&f, &setup, 4.0, 3.0, 1).unwrap();
        assert_eq!(r.g0, 1.0);
        assert_eq!(r.mean_log_inverse, 0.0);
        assert!(r.integrated_pass && r.event_pass);
    }

    #[test]
    fn gaussian_trace_is_deterministic() {
        let g = LogConcaveFamily::gaussian(3);
        let r = guan_trace_check(&g, 0.5, 0.05, 4, Backend::ClosedForm, 1, 0).unwrap();
        assert!((r.mean_trace - 3.0 / 1.5).abs() < 1e-12);
        assert_eq!(r.stderr, 0.0);
    }
}
