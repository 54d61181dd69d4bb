//! Empirical replay of the small-ball argument along the localization:
//! the trace event at time `c₁`, the projected bound on the tilted measure,
//! and the transfer event back to the original measure.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::bounds::{projected_paouris, BoundSpec};
use crate::analysis::checks::{binomial_stderr, ensemble};
use crate::analysis::estimate::small_ball_estimate;
use crate::error::{Error, Result};
use crate::localization::{measure_under_tilt, Backend, PathConfig, Region};
use crate::measures::LogConcaveFamily;
use crate::rng::{self, tag};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateParams {
    pub c1: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub paths: usize,
    pub backend: Backend,
    /// Importance-sampling budget per moment and per region estimate.
    pub budget: usize,
    /// Draws for the direct estimate of `μ(S_ε)`.
    pub samples: usize,
    pub c0_constant: f64,
    pub c_universal: f64,
    pub binomial_sigmas: f64,
    pub mc_sigmas: f64,
}

impl CertificateParams {
    pub fn new(c1: f64, lambda: f64, epsilon: f64, backend: Backend) -> Self {
        CertificateParams {
            c1,
            lambda,
            epsilon,
            dt: 1e-3,
            paths: 256,
            backend,
            budget: 100_000,
            samples: 1_000_000,
            c0_constant: 3.0,
            c_universal: 1.0,
            binomial_sigmas: 3.0,
            mc_sigmas: 3.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 <= 1.0) {
            return Err(Error::InvalidArgument(format!("c1 must lie in (0,1], got {}", self.c1)));
        }
        if !(self.lambda > 1.0) {
            return Err(Error::InvalidArgument(format!("λ must exceed 1, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("ε must lie in (0,1), got {}", self.epsilon)));
        }
        if self.paths == 0 || self.samples == 0 {
            return Err(Error::InvalidArgument("paths and samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRecord {
    pub index: usize,
    pub trace: f64,
    pub lambda_max: f64,
    pub in_e0: bool,
    /// `μ_t(S_ε)` and its standard error.
    pub tilted_mass: f64,
    pub tilted_mass_stderr: f64,
    /// Projected bound on `μ_t(S_ε)`, capped at 1; set on `E₀` paths.
    pub projected_bound: Option<f64>,
    pub in_e1: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    /// Over the paths that completed.
    pub value: f64,
    /// With ESS failures counted as the unfavorable outcome; `pass` uses this.
    pub worst_case: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub family: String,
    pub dimension: usize,
    pub params: CertificateParams,
    /// `C₁ = 8·C₀²`.
    pub c1_diameter_constant: f64,
    pub paths: usize,
    pub ess_failures: usize,
    /// (a) frequency of `E₀ = {Tr(A_{c₁}) ≥ c₁n/2}` against `c₁²/2`.
    pub e0: Verdict,
    /// (b) number of `E₀` paths whose measured `μ_t(S_ε)` exceeds the
    /// projected bound by more than the Monte-Carlo slack.
    pub projected: Verdict,
    /// (c) frequency of `E₁` against `1 - 1/λ`.
    pub e1: Verdict,
    /// Direct estimate of `μ(S_ε)`; `None` when no draw hit `S_ε`.
    pub mass: Option<f64>,
    pub mass_ci: (f64, f64),
    /// `e^{C₁n/2}·bound^{1/λ}` minimized over `E₀ ∩ E₁` paths, capped at 1.
    pub implied_bound: Option<f64>,
    pub end_to_end_pass: bool,
    pub records: Vec<PathRecord>,
}

impl CertificateReport {
    pub fn pass(&self) -> bool {
        self.e0.pass && self.projected.pass && self.e1.pass && self.end_to_end_pass
    }
}

pub fn assemble_certificate(family: &LogConcaveFamily, params: &CertificateParams, seed: u64) -> Result<CertificateReport> {
    params.validate()?;
    let n = family.dim();
    let nf = n as f64;
    let region = Region::centered_ball(n, (params.epsilon * nf).sqrt());
    let c1_diameter_constant = 8.0 * params.c0_constant * params.c0_constant;
    let log_growth = c1_diameter_constant * nf / 2.0;

    let direct = small_ball_estimate(
        family,
        &DVector::zeros(n),
        (params.epsilon * nf).sqrt(),
        params.samples,
        rng::derive_seed(seed, &[tag::SAMPLE]),
    )?;
    // Zero hits: only the upper confidence bound is known.
    let mass = (direct.hits > 0).then_some(direct.p_hat);
    let mass_for_event = mass.unwrap_or(direct.ci_high);

    let config = PathConfig::new(params.c1, params.dt, params.backend)
        .budget(params.budget)
        .record_every(usize::MAX);
    let mut ens = ensemble(family, &config, params.paths, seed);
    if let Some(i) = ens.failures.iter().position(|(_, e)| !matches!(e, Error::LowEss { .. })) {
        return Err(ens.failures.swap_remove(i).1);
    }
    let mut ess_failures = ens.failures.len();
    let indices: Vec<usize> = {
        let failed: Vec<usize> = ens.failures.iter().map(|(i, _)| *i).collect();
        (0..params.paths).filter(|i| !failed.contains(i)).collect()
    };

    let outcomes: Vec<Result<PathRecord>> = ens
        .paths
        .par_iter()
        .zip(indices.par_iter())
        .map(|(path, &index)| {
            let (state, moments) = path.last();
            let trace = moments.trace();
            let spectrum: Vec<f64> = moments.spectrum().into_iter().map(|v| v.max(f64::MIN_POSITIVE)).collect();
            let in_e0 = trace >= params.c1 * nf / 2.0;
            let s = rng::derive_seed(seed, &[tag::REGION, index as u64]);
            let tilted = measure_under_tilt(family, state, &region, params.budget, s)?;
            let projected_bound = if in_e0 {
                let eps_prime = params.epsilon * nf / trace;
                Some(if eps_prime >= 1.0 {
                    1.0
                } else {
                    let spec = BoundSpec::new(spectrum, 1.0 / params.c1.sqrt(), eps_prime, params.c_universal)?;
                    projected_paouris(&spec)?.value.min(1.0)
                })
            } else {
                None
            };
            // log μ(S) ≤ C₁n/2 + log(μ_t(S))/λ
            let in_e1 = tilted.p > 0.0 && mass_for_event.ln() <= log_growth + tilted.p.ln() / params.lambda;
            Ok(PathRecord {
                index,
                trace,
                lambda_max: moments.lambda_max(),
                in_e0,
                tilted_mass: tilted.p,
                tilted_mass_stderr: tilted.stderr,
                projected_bound,
                in_e1,
            })
        })
        .collect();
    let mut records = Vec::with_capacity(outcomes.len());
    for r in outcomes {
        match r {
            Ok(rec) => records.push(rec),
            Err(Error::LowEss { .. }) => ess_failures += 1,
            Err(e) => return Err(e),
        }
    }

    let trials = records.len() + ess_failures;
    let frequency = |hits: usize, q: f64| {
        let threshold = q - params.binomial_sigmas * binomial_stderr(q, trials);
        let worst_case = hits as f64 / trials as f64;
        let value = if records.is_empty() { 0.0 } else { hits as f64 / records.len() as f64 };
        Verdict { value, worst_case, threshold, pass: worst_case >= threshold }
    };
    let e0 = frequency(records.iter().filter(|r| r.in_e0).count(), params.c1 * params.c1 / 2.0);

    let violations = records
        .iter()
        .filter(|r| match r.projected_bound {
            Some(b) => r.tilted_mass - params.mc_sigmas * r.tilted_mass_stderr > b,
            None => false,
        })
        .count();
    let projected =
        Verdict { value: violations as f64, worst_case: violations as f64, threshold: 0.0, pass: violations == 0 };
    let e1 = frequency(records.iter().filter(|r| r.in_e1).count(), 1.0 - 1.0 / params.lambda);

    let implied_bound = records
        .iter()
        .filter(|r| r.in_e0 && r.in_e1)
        .filter_map(|r| r.projected_bound)
        .map(|b| (log_growth + b.ln() / params.lambda).exp().min(1.0))
        .min_by(f64::total_cmp);
    let end_to_end_pass = match implied_bound {
        Some(b) => direct.ci_low <= b,
        None => false,
    };

    Ok(CertificateReport {
        family: family.name().to_string(),
        dimension: n,
        params: params.clone(),
        c1_diameter_constant,
        paths: records.len(),
        ess_failures,
        e0,
        projected,
        e1,
        mass,
        mass_ci: (direct.ci_low, direct.ci_high),
        implied_bound,
        end_to_end_pass,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        let g = LogConcaveFamily::gaussian(2);
        let mut p = CertificateParams::new(0.5, 1.0, 0.1, Backend::ClosedForm);
        assert!(assemble_certificate(&g, &p, 0).is_err());
        p.lambda = 2.0;
        p.c1 = 1.5;
        assert!(assemble_certificate(&g, &p, 0).is_err());
    }

    #[test]
    fn gaussian_trace_event_is_certain() {
        let g = LogConcaveFamily::gaussian(4);
        let mut p = CertificateParams::new(0.5, 4.0, 0.1, Backend::ClosedForm);
        p.dt = 0.05;
        p.paths = 16;
        p.budget = 20_000;
        p.samples = 20_000;
        let r = assemble_certificate(&g, &p, 3).unwrap();
        assert_eq!(r.e0.value, 1.0);
        assert!(r.pass(), "{r:?}");
    }
}
