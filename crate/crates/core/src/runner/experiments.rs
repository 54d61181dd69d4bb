//! One function per named experiment. Each reads its parameters from the
//! config, falling back to the defaults documented on the function.

use nalgebra::DVector;
use rand::Rng;
use serde_json::{json, Value};

use crate::analysis::bounds::{
    klartag_psi_sq, lee_vempala_bound, paouris_bound, projected_paouris, select_subspace, threshold_warning, BoundSpec,
};
use crate::analysis::certificate::{assemble_certificate, CertificateParams};
use crate::analysis::checks::{
    covbound_check, ensemble, guan_trace_check, martingale_check, shrinkage_check, ShrinkageSetup,
};
use crate::analysis::diagnostics::{borell_survey, certify_c0, subgaussian_norm};
use crate::analysis::estimate::{gaussian_small_ball_oracle, small_ball_profile};
use crate::analysis::fit::{exponent_fit, fit_rows};
use crate::analysis::slicing::{isotropic_constant, slicing_report, square_disc_area, whiten_polytope, Body, Polytope};
use crate::error::{Error, Result};
use crate::localization::{Backend, PathConfig, Region};
use crate::measures::{KindTag, LogConcaveFamily};
use crate::reduction;
use crate::rng::{self, tag};
use crate::runner::config::ExperimentConfig;
use crate::runner::{num, Check, Outcome, Table};

pub fn dispatch(config: &ExperimentConfig) -> Result<Outcome> {
    match config.experiment.as_str() {
        "reduce" => reduce(config),
        "localize" => localize(config),
        "smallball" => smallball(config),
        "bounds" => bounds(config),
        "martingale" => martingale(config),
        "covbound" => covbound(config),
        "borell" => borell(config),
        "subgaussian" => subgaussian(config),
        "shrinkage" => shrinkage(config),
        "guan" => guan(config),
        "subspace" => subspace(config),
        "certificate" => certificate(config),
        "slicing" => slicing(config),
        other => Err(Error::Config(vec![format!(
            "experiment: unknown `{other}`; valid names: {}",
            crate::runner::EXPERIMENTS.join(", ")
        )])),
    }
}

/// The configured backend if legal for `family`, else the preferred one.
fn backend_for(config: &ExperimentConfig, family: &LogConcaveFamily) -> Result<Backend> {
    match config.params.backend.as_deref().and_then(Backend::parse) {
        None => Ok(Backend::preferred(family)),
        Some(b) if b.is_legal(family) => Ok(b),
        Some(b) => Err(Error::BackendUnsupported { backend: b.to_string(), family: family.name().to_string() }),
    }
}

/// Families whose localization is exactly `A_t = I/(1+t)`.
fn is_standard_gaussian(family: &LogConcaveFamily) -> bool {
    family.kind_tag() == KindTag::Gaussian
}

fn covbound_tolerance(config: &ExperimentConfig, backend: Backend) -> f64 {
    match backend {
        Backend::Sampling => config.tolerances.covbound_sampling,
        _ => config.tolerances.covbound_exact,
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Record stride that lands exactly on every requested time.
fn stride_for(times: &[f64], dt: f64) -> usize {
    times.iter().map(|t| (t / dt).round() as usize).fold(0, gcd).max(1)
}

fn seed(config: &ExperimentConfig) -> u64 {
    rng::derive_seed(config.seed, &[tag::EXPERIMENT, 1])
}

/// Symmetrize, condition to `B(0, 2C₀√n)` and whiten. Defaults: `C₀` from
/// the constants table, 10⁵ draws for the zoo certificate of `C₀` at `p = 4`.
pub fn reduce(config: &ExperimentConfig) -> Result<Outcome> {
    let n = config.dim();
    let base = LogConcaveFamily::from_tag(
        KindTag::parse(config.kind()).ok_or_else(|| Error::InvalidArgument(format!("`{}` is not a family", config.kind())))?,
        n,
    )?;
    let c0 = config.params.c0_constant.or(config.family.c0).unwrap_or(config.constants.c0);
    let samples = config.params.samples.unwrap_or(100_000);
    let cert = certify_c0(c0, &[2, 4, 8], samples, rng::derive_seed(config.seed, &[tag::DIRECTION]))?;
    let (reduced, report) = reduction::reduce(&base, c0, seed(config))?;

    let mut table = Table::new(&[
        "family",
        "n",
        "c0_constant_used",
        "conditioning_mass",
        "spectrum_min",
        "spectrum_max",
        "final_support_radius",
    ]);
    let (lo, hi) = report.covariance_spectrum_bounds;
    table.push(vec![
        reduced.name().to_string(),
        n.to_string(),
        num(c0),
        num(report.conditioning_mass),
        num(lo),
        num(hi),
        num(report.final_support_radius),
    ]);

    let tol = &config.tolerances;
    let mass_se = (report.conditioning_mass * (1.0 - report.conditioning_mass) / reduction::DEFAULT_MASS_SAMPLES as f64).sqrt();
    let mass_floor = 1.0 - 1.0 / (4.0 * c0 * c0) - tol.mc_sigmas * mass_se;
    let radius_cap = 2.0 * std::f64::consts::SQRT_2 * c0 * (n as f64).sqrt() * (1.0 + tol.midpoint_slack);
    let checks = vec![
        Check::compare(format!("c0_certified_p4 ({} n={})", cert.worst.family, cert.worst.dimension), cert.worst.ratio, c0, false),
        Check::compare("conditioning_mass", report.conditioning_mass, mass_floor, true),
        Check::compare("spectrum_min", lo, 0.5 - tol.sandwich_slack, true),
        Check::compare("spectrum_max", hi, 2.0 + tol.sandwich_slack, false),
        Check::compare("support_radius", report.final_support_radius, radius_cap, false),
    ];
    Ok(Outcome {
        table,
        checks,
        summary: json!({ "report": report, "c0_certificate": cert }),
        warnings: Vec::new(),
        report: Some(serde_json::to_value(&report)?),
    })
}

/// Path ensemble of the tilt SDE. Defaults: `T = 1`, `dt = 10⁻³`, 16 paths,
/// budget 10⁵, a record every 10 steps.
pub fn localize(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let family = config.family_at(config.dim())?;
    let backend = backend_for(config, &family)?;
    let path_config = PathConfig::new(p.horizon.unwrap_or(1.0), p.dt.unwrap_or(1e-3), backend)
        .budget(p.budget.unwrap_or(100_000))
        .record_every(p.record_every.unwrap_or(10));
    let paths = p.paths.unwrap_or(16);
    let ens = ensemble(&family, &path_config, paths, seed(config));

    let mut table = Table::new(&["path_id", "t", "theta_norm", "a_norm", "trace_A", "lambda_max_A", "ess"]);
    let failed: Vec<usize> = ens.failures.iter().map(|(i, _)| *i).collect();
    let ids = (0..paths).filter(|i| !failed.contains(i));
    let (mut err_a, mut err_cov) = (0.0f64, 0.0f64);
    for (id, path) in ids.zip(&ens.paths) {
        for ((t, state), m) in path.times.iter().zip(&path.states).zip(&path.moments) {
            table.push(vec![
                id.to_string(),
                num(*t),
                num(state.theta.norm()),
                num(m.barycenter.norm()),
                num(m.trace()),
                num(m.lambda_max()),
                m.diagnostics.ess.map(num).unwrap_or_default(),
            ]);
            let s = 1.0 / (1.0 + t);
            err_a = err_a.max((&m.barycenter - &state.theta * s).amax());
            for i in 0..m.covariance.nrows() {
                for j in 0..m.covariance.ncols() {
                    let target = if i == j { s } else { 0.0 };
                    err_cov = err_cov.max((m.covariance[(i, j)] - target).abs());
                }
            }
        }
    }
    let cov = covbound_check(&ens.paths, 0.0, covbound_tolerance(config, backend));
    let mut checks = vec![
        Check::compare("failed_paths", ens.failures.len() as f64, 0.0, false),
        Check::compare("covbound_violations", cov.violations as f64, 0.0, false),
    ];
    if is_standard_gaussian(&family) && backend == Backend::ClosedForm {
        checks.push(Check::compare("gaussian_A_closed_form", err_cov, config.tolerances.gaussian_exact, false));
        checks.push(Check::compare("gaussian_a_closed_form", err_a, config.tolerances.gaussian_exact, false));
    }
    let failures: Vec<String> = ens.failures.iter().map(|(i, e)| format!("path {i}: {e}")).collect();
    Ok(Outcome {
        table,
        checks,
        summary: json!({
            "family": family.name(),
            "backend": backend,
            "paths": ens.paths.len(),
            "failures": failures,
            "covbound": cov,
        }),
        warnings: Vec::new(),
        report: None,
    })
}

/// Centered small-ball table at `r = √(εn)`. Defaults: dims `[dim]`,
/// `ε ∈ {0.05, 0.1, 0.2}`, `N = 10⁶`. Gaussian rows carry the
/// incomplete-gamma value and the Chernoff bound.
pub fn smallball(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let dims = p.dims.clone().unwrap_or_else(|| vec![config.dim()]);
    let eps = p.epsilons.clone().unwrap_or_else(|| vec![0.05, 0.1, 0.2]);
    let samples = p.samples.unwrap_or(1_000_000);
    let mut table = Table::new(&[
        "family", "n", "epsilon", "radius", "samples", "hits", "estimate", "ci_low", "ci_high", "exact", "chernoff",
    ]);
    let (mut cells, mut covered, mut ordered, mut oracle_cells) = (0usize, 0usize, true, 0usize);
    let mut fit_input = Vec::new();
    for family in config.families(&dims)? {
        let n = family.dim();
        let radii: Vec<f64> = eps.iter().map(|e| (e * n as f64).sqrt()).collect();
        let s = rng::derive_seed(seed(config), &[n as u64, rng::seed_for_name(0, family.name())]);
        let rows = small_ball_profile(&family, &DVector::zeros(n), &radii, samples, s)?;
        for (&e, est) in eps.iter().zip(&rows) {
            cells += 1;
            let oracle = if is_standard_gaussian(&family) { Some(gaussian_small_ball_oracle(n, e)?) } else { None };
            if let Some(o) = oracle {
                oracle_cells += 1;
                covered += est.covers(o.exact) as usize;
                ordered &= o.exact <= o.chernoff;
            }
            fit_input.push((e, est.clone()));
            table.push(vec![
                family.name().to_string(),
                n.to_string(),
                num(e),
                num(est.radius),
                est.samples.to_string(),
                est.hits.to_string(),
                num(est.p_hat),
                num(est.ci_low),
                num(est.ci_high),
                oracle.map(|o| num(o.exact)).unwrap_or_default(),
                oracle.map(|o| num(o.chernoff)).unwrap_or_default(),
            ]);
        }
    }
    let mut checks = vec![Check::new(
        "interval_contains_estimate",
        fit_input.iter().all(|(_, e)| e.ci_low <= e.p_hat && e.p_hat <= e.ci_high),
        format!("{cells} cells"),
    )];
    if oracle_cells > 0 {
        // The coverage floor is a fraction of the grid: 10 of 12 cells by default.
        let need = (oracle_cells * config.tolerances.wilson_min_cover).div_ceil(12);
        let mut c = Check::compare("wilson_covers_exact", covered as f64, need as f64, true);
        c.detail = format!("{covered} of {oracle_cells} cells covered, need {need}");
        checks.push(c);
        checks.push(Check::new("exact_below_chernoff", ordered, format!("{oracle_cells} cells")));
    }
    let rows = fit_rows(&fit_input);
    let fit = if rows.is_empty() { None } else { Some(exponent_fit(&rows)?) };
    Ok(Outcome {
        table,
        checks,
        summary: json!({ "cells": cells, "fit": fit }),
        warnings: Vec::new(),
        report: None,
    })
}

/// Closed-form bounds over an ε grid. Defaults: spectrum `I_dim`, `b = 1`,
/// `ε ∈ {0.01, 0.05, 0.1, 0.2, 0.5}`, constants from the constants table.
pub fn bounds(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let spectrum = p.spectrum.clone().unwrap_or_else(|| vec![1.0; config.dim()]);
    let n = spectrum.len();
    let b = p.b.unwrap_or(1.0);
    let eps = p.epsilons.clone().unwrap_or_else(|| vec![0.01, 0.05, 0.1, 0.2, 0.5]);
    let k = config.constants.clone();
    let psi_sq = klartag_psi_sq(n, k.kls_c);
    let k_sel = select_subspace(&spectrum)?;
    let trace: f64 = spectrum.iter().sum();
    let mut table = Table::new(&["epsilon", "paouris", "projected_base", "projected_exponent", "projected", "lee_vempala", "k"]);
    let mut warnings = Vec::new();
    let mut projected_values = Vec::new();
    for &e in &eps {
        if let Some(w) = threshold_warning(e) {
            warnings.push(w);
        }
        let spec = BoundSpec::new(spectrum.clone(), b, e, k.c)?;
        let pb = paouris_bound(&spec)?;
        let proj = projected_paouris(&spec)?;
        let lv = if n >= 2 { lee_vempala_bound(n, e, k.c_b, psi_sq)? } else { f64::NAN };
        projected_values.push((proj.base, proj.value));
        table.push(vec![num(e), num(pb), num(proj.base), num(proj.exponent), num(proj.value), num(lv), k_sel.to_string()]);
    }
    if n < 2 {
        warnings.push("the Lee–Vempala bound needs n ≥ 2; its column is empty".into());
    }
    let lambda_k = spectrum[k_sel - 1];
    let floor = trace / (2.0 * n as f64);
    // Along increasing ε, restricted to grid points whose base is below 1.
    let mut sorted: Vec<(f64, (f64, f64))> = eps.iter().copied().zip(projected_values).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let below: Vec<f64> = sorted.iter().filter(|(_, (base, _))| *base < 1.0).map(|(_, (_, v))| *v).collect();
    let monotone = below.windows(2).all(|w| w[0] <= w[1]);
    let checks = vec![
        Check::compare("subspace_postcondition", lambda_k, floor, true),
        Check::new("projected_monotone_in_epsilon", monotone, format!("{} grid points with base < 1", below.len())),
    ];
    Ok(Outcome {
        table,
        checks,
        summary: json!({ "n": n, "b": b, "k": k_sel, "psi_sq": psi_sq, "constants": k }),
        warnings,
        report: None,
    })
}

/// Ensemble means of `x·e₁`, `|x|²` and the ball indicator against `t = 0`.
/// Defaults: `T = 1`, `dt = 10⁻³`, 256 paths, budget 2·10⁴, `t ∈ {0.25, 0.5, 1}`.
pub fn martingale(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let family = config.family_at(config.dim())?;
    let backend = backend_for(config, &family)?;
    let horizon = p.horizon.unwrap_or(1.0);
    let dt = p.dt.unwrap_or(1e-3);
    let times: Vec<f64> = p.times.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0]).into_iter().filter(|t| *t <= horizon).collect();
    if times.is_empty() {
        return Err(Error::InvalidArgument("no check time lies within the horizon".into()));
    }
    let budget = p.budget.unwrap_or(20_000);
    let every = p.record_every.unwrap_or_else(|| stride_for(&times, dt));
    let path_config = PathConfig::new(horizon, dt, backend).budget(budget).record_every(every);
    let ens = ensemble(&family, &path_config, p.paths.unwrap_or(256), seed(config));
    let report = martingale_check(&family, &ens, &times, budget, config.tolerances.martingale_sigmas, seed(config))?;

    let mut table = Table::new(&["function", "t", "mean", "stderr", "reference", "reference_stderr", "z"]);
    for r in &report.rows {
        table.push(vec![
            r.function.as_str().to_string(),
            num(r.t),
            num(r.mean),
            num(r.stderr),
            num(r.reference),
            num(r.reference_stderr),
            num(r.z),
        ]);
    }
    let mut checks = vec![Check::compare("failed_paths", report.failed_paths as f64, 0.0, false)];
    for f in crate::analysis::checks::TestFunction::ALL {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.function == f).collect();
        let worst = rows.iter().map(|r| r.z).fold(0.0, f64::max);
        let mut c = Check::compare(f.as_str(), worst, report.sigmas, false);
        c.pass = rows.iter().all(|r| r.pass);
        checks.push(c);
    }
    let cov = covbound_check(&ens.paths, 0.0, covbound_tolerance(config, backend));
    Ok(Outcome {
        table,
        checks,
        summary: json!({ "family": family.name(), "backend": backend, "report": report, "covbound": cov }),
        warnings: Vec::new(),
        report: None,
    })
}

/// `λ_max(A_t) ≤ 1/t + tol` on every recorded state. Defaults: `T = 1`,
/// `dt = 10⁻³`, 64 paths, budget 2·10⁴, a record every 10 steps.
pub fn covbound(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let family = config.family_at(config.dim())?;
    let backend = backend_for(config, &family)?;
    let path_config = PathConfig::new(p.horizon.unwrap_or(1.0), p.dt.unwrap_or(1e-3), backend)
        .budget(p.budget.unwrap_or(20_000))
        .record_every(p.record_every.unwrap_or(10));
    let ens = ensemble(&family, &path_config, p.paths.unwrap_or(64), seed(config));
    let tol = covbound_tolerance(config, backend);
    let mut table = Table::new(&["path", "t", "lambda_max_A", "inverse_t", "excess"]);
    for (i, path) in ens.paths.iter().enumerate() {
        for (t, m) in path.times.iter().zip(&path.moments) {
            if *t > 0.0 {
                let excess = m.lambda_max() - 1.0 / t;
                table.push(vec![i.to_string(), num(*t), num(m.lambda_max()), num(1.0 / t), num(excess)]);
            }
        }
    }
    let report = covbound_check(&ens.paths, 0.0, tol);
    let mut c = Check::compare("violations", report.violations as f64, 0.0, false);
    c.detail = format!("{} of {} states; max excess {} (tolerance {tol})", report.violations, report.states, report.max_excess);
    let checks = vec![Check::compare("failed_paths", ens.failures.len() as f64, 0.0, false), c];
    Ok(Outcome {
        table,
        checks,
        summary: json!({ "family": family.name(), "backend": backend, "report": report }),
        warnings: Vec::new(),
        report: None,
    })
}

/// Borell ratios. Defaults: dims `[dim]`, `p ∈ {3, 4, 6}`, 8 directions, `N = 10⁵`.
pub fn borell(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let dims = p.dims.clone().unwrap_or_else(|| vec![config.dim()]);
    let ps = p.ps.clone().unwrap_or_else(|| vec![3.0, 4.0, 6.0]);
    let families = config.families(&dims)?;
    let rows = borell_survey(&families, &ps, p.directions.unwrap_or(8), p.samples.unwrap_or(100_000), seed(config))?;
    let mut table = Table::new(&["family", "n", "p", "direction", "ratio", "stderr"]);
    for r in &rows {
        table.push(vec![r.family.clone(), r.dimension.to_string(), num(r.p), r.direction.to_string(), num(r.ratio), num(r.stderr)]);
    }
    let bound = config.tolerances.borell_max;
    let mut checks = Vec::new();
    for &pv in &ps {
        let worst = rows.iter().filter(|r| r.p == pv).max_by(|a, b| a.ratio.total_cmp(&b.ratio));
        if let Some(w) = worst {
            let mut c = Check::compare(format!("borell_p{pv}"), w.ratio, bound, false);
            c.detail = format!("max {} ± {} at {} n={} ≤ {bound}", w.ratio, w.stderr, w.family, w.dimension);
            checks.push(c);
        }
    }
    Ok(Outcome { table, checks, summary: json!({ "rows": rows.len() }), warnings: Vec::new(), report: None })
}

/// Subgaussian norms of `f_{t,θ}`. Defaults: dims `[dim]`, `t ∈ {0.5, 1}`,
/// `θ = 0`, `p_max = 6`, `N = 10⁵`.
pub fn subgaussian(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let dims = p.dims.clone().unwrap_or_else(|| vec![config.dim()]);
    let times = p.times.clone().unwrap_or_else(|| vec![0.5, 1.0]);
    let p_max = p.p_max.unwrap_or(6);
    let samples = p.samples.unwrap_or(100_000);
    let factor = config.tolerances.subgaussian_factor;
    let mut table = Table::new(&["family", "n", "t", "estimate", "bound", "p_at_max", "ess"]);
    let mut checks = Vec::new();
    for (fi, family) in config.families(&dims)?.iter().enumerate() {
        let n = family.dim();
        let theta = match &p.theta {
            Some(v) if v.len() == n => DVector::from_vec(v.clone()),
            Some(_) => return Err(Error::InvalidArgument("params.theta length must equal the dimension".into())),
            None => DVector::zeros(n),
        };
        for (ti, &t) in times.iter().enumerate() {
            let s = rng::derive_seed(seed(config), &[fi as u64, ti as u64]);
            let est = subgaussian_norm(family, t, &theta, p_max, samples, s)?;
            let bound = factor / t.sqrt();
            table.push(vec![family.name().to_string(), n.to_string(), num(t), num(est.value), num(bound), num(est.p_at_max), num(est.ess)]);
            checks.push(Check::compare(format!("{} n={n} t={t}", family.name()), est.value, bound, false));
        }
    }
    Ok(Outcome { table, checks, summary: json!({ "p_max": p_max }), warnings: Vec::new(), report: None })
}

/// Shrinkage of a small set along the localization. Defaults: radius `√n`,
/// `T = 0.25`, `dt = 10⁻³`, 256 paths, `λ = 2`, budget 10⁴, `N = 10⁵` for `g₀`.
pub fn shrinkage(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let n = config.dim();
    let family = config.family_at(n)?;
    let setup = ShrinkageSetup {
        region: Region::centered_ball(n, p.radius.unwrap_or((n as f64).sqrt())),
        horizon: p.horizon.unwrap_or(0.25),
        dt: p.dt.unwrap_or(1e-3),
        paths: p.paths.unwrap_or(256),
        lambda: p.lambda.unwrap_or(2.0),
        backend: backend_for(config, &family)?,
        budget: p.budget.unwrap_or(10_000),
        initial_samples: p.samples.unwrap_or(100_000),
    };
    let tol = &config.tolerances;
    let r = shrinkage_check(&family, &setup, tol.shrinkage_sigmas, tol.binomial_sigmas, seed(config))?;
    let mut table = Table::new(&[
        "family",
        "region",
        "diameter",
        "horizon",
        "lambda",
        "g0",
        "paths",
        "failed_paths",
        "mean_log_inverse",
        "mean_log_inverse_stderr",
        "integrated_bound",
        "event_frequency",
        "event_threshold",
    ]);
    table.push(vec![
        family.name().to_string(),
        r.region.clone(),
        num(r.diameter),
        num(r.horizon),
        num(r.lambda),
        num(r.g0),
        r.paths.to_string(),
        r.failed_paths.to_string(),
        num(r.mean_log_inverse),
        num(r.mean_log_inverse_stderr),
        num(r.integrated_bound),
        num(r.event_frequency),
        num(r.event_threshold),
    ]);
    let mut integrated = Check::compare(
        "integrated",
        r.mean_log_inverse,
        r.integrated_bound + tol.shrinkage_sigmas * r.mean_log_inverse_stderr,
        false,
    );
    integrated.pass = r.integrated_pass;
    let mut event = Check::compare("event_frequency", r.event_frequency, r.event_threshold, true);
    event.pass = r.event_pass;
    Ok(Outcome { table, checks: vec![integrated, event], summary: json!({ "report": r }), warnings: Vec::new(), report: None })
}

/// `E Tr(A_{t*})` per family. Defaults: dims `[dim]`, `t* = 0.5`,
/// `dt = 10⁻³`, 64 paths, budget 10⁴.
pub fn guan(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let dims = p.dims.clone().unwrap_or_else(|| vec![config.dim()]);
    let t_star = p.t_star.unwrap_or(0.5);
    let tol = &config.tolerances;
    let mut table = Table::new(&[
        "family", "n", "t_star", "paths", "failed_paths", "mean_trace", "stderr", "worst_case_mean_over_n", "upper",
    ]);
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for (fi, family) in config.families(&dims)?.iter().enumerate() {
        let backend = backend_for(config, family)?;
        let s = rng::derive_seed(seed(config), &[fi as u64]);
        let r = guan_trace_check(family, t_star, p.dt.unwrap_or(1e-3), p.paths.unwrap_or(64), backend, p.budget.unwrap_or(10_000), s)?;
        let nf = r.dimension as f64;
        table.push(vec![
            r.family.clone(),
            r.dimension.to_string(),
            num(t_star),
            r.paths.to_string(),
            r.failed_paths.to_string(),
            num(r.mean_trace),
            num(r.stderr),
            num(r.worst_case_mean() / nf),
            num(r.upper),
        ]);
        let label = format!("{} n={}", r.family, r.dimension);
        checks.push(Check::compare(format!("{label} lower"), r.worst_case_mean() / nf, tol.guan_min_ratio, true));
        checks.push(Check::compare(format!("{label} upper"), r.mean_trace, r.upper + tol.mc_sigmas * r.stderr, false));
        if is_standard_gaussian(family) && backend == Backend::ClosedForm {
            let err = (r.mean_trace / nf - 1.0 / (1.0 + t_star)).abs();
            checks.push(Check::compare(format!("{label} closed_form"), err, tol.gaussian_exact, false));
        }
        reports.push(r);
    }
    Ok(Outcome { table, checks, summary: json!({ "reports": reports }), warnings: Vec::new(), report: None })
}

/// `λ_k ≥ Tr/(2n)` on random descending spectra (and on `params.spectrum`
/// if given). Defaults: 10⁴ trials, dimensions 1 to 32, entries in `(0, 10]`.
pub fn subspace(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let trials = p.trials.unwrap_or(10_000);
    let mut rng = rng::stream(seed(config), &[tag::SAMPLE]);
    let mut spectra: Vec<Vec<f64>> = p.spectrum.iter().cloned().collect();
    for _ in 0..trials {
        let n = rng.random_range(1..=32usize);
        let mut s: Vec<f64> = (0..n).map(|_| 10.0 * (1.0 - rng.random::<f64>())).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        spectra.push(s);
    }
    let mut table = Table::new(&["trial", "n", "k", "lambda_k", "trace_over_2n", "holds"]);
    let mut failures = 0usize;
    for (i, s) in spectra.iter().enumerate() {
        let k = select_subspace(s)?;
        let floor = s.iter().sum::<f64>() / (2.0 * s.len() as f64);
        let holds = s[k - 1] >= floor;
        failures += (!holds) as usize;
        table.push(vec![i.to_string(), s.len().to_string(), k.to_string(), num(s[k - 1]), num(floor), holds.to_string()]);
    }
    let mut c = Check::compare("postcondition_failures", failures as f64, 0.0, false);
    c.detail = format!("{failures} of {} spectra", spectra.len());
    Ok(Outcome { table, checks: vec![c], summary: json!({ "spectra": spectra.len() }), warnings: Vec::new(), report: None })
}

/// Certificate replay. Defaults: `c₁` and `C₀` from the constants table,
/// `λ = 4`, `ε = 0.05`, `dt = 10⁻²`, 256 paths, budget 10⁴, `N = 10⁶`.
pub fn certificate(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let family = config.family_at(config.dim())?;
    let backend = backend_for(config, &family)?;
    let c1 = p.c1.unwrap_or(config.constants.c1);
    let eps = p.epsilons.as_ref().and_then(|e| e.first().copied()).unwrap_or(0.05);
    let mut params = CertificateParams::new(c1, p.lambda.unwrap_or(4.0), eps, backend);
    params.dt = p.dt.unwrap_or(1e-2);
    params.paths = p.paths.unwrap_or(256);
    params.budget = p.budget.unwrap_or(10_000);
    params.samples = p.samples.unwrap_or(1_000_000);
    params.c0_constant = p.c0_constant.or(config.family.c0).unwrap_or(config.constants.c0);
    params.c_universal = config.constants.c;
    params.binomial_sigmas = config.tolerances.binomial_sigmas;
    params.mc_sigmas = config.tolerances.mc_sigmas;
    let r = assemble_certificate(&family, &params, seed(config))?;

    let mut table = Table::new(&[
        "path", "trace_A", "lambda_max_A", "in_e0", "tilted_mass", "tilted_mass_stderr", "projected_bound", "in_e1",
    ]);
    for rec in &r.records {
        table.push(vec![
            rec.index.to_string(),
            num(rec.trace),
            num(rec.lambda_max),
            rec.in_e0.to_string(),
            num(rec.tilted_mass),
            num(rec.tilted_mass_stderr),
            rec.projected_bound.map(num).unwrap_or_default(),
            rec.in_e1.to_string(),
        ]);
    }
    let verdict = |name: &str, v: &crate::analysis::certificate::Verdict, at_least: bool| {
        let mut c = Check::compare(name, v.worst_case, v.threshold, at_least);
        c.detail = format!("{} (over completed paths {}) against {}", v.worst_case, v.value, v.threshold);
        c.pass = v.pass;
        c
    };
    let mut end = Check::new(
        "end_to_end",
        r.end_to_end_pass,
        format!("μ(S_ε) CI {:?} against implied bound {:?}", r.mass_ci, r.implied_bound),
    );
    end.value = r.mass;
    end.threshold = r.implied_bound;
    let checks = vec![verdict("e0_trace_event", &r.e0, true), verdict("projected_violations", &r.projected, false), verdict("e1_transfer_event", &r.e1, true), end];
    let mut warnings = Vec::new();
    if r.ess_failures > 0 {
        warnings.push(format!("{} paths failed the ESS gate and count as unfavorable", r.ess_failures));
    }
    let mut summary = serde_json::to_value(&r)?;
    if let Value::Object(m) = &mut summary {
        m.remove("records");
    }
    Ok(Outcome { table, checks, summary, warnings, report: None })
}

fn body_from(config: &ExperimentConfig) -> Result<Body> {
    let kind = config.kind();
    if kind == "polytope" {
        return match &config.params.vertices {
            // Given vertices are moved to isotropic position first.
            Some(v) => {
                let samples = config.params.samples.unwrap_or(1_000_000);
                let s = rng::derive_seed(seed(config), &[tag::SAMPLE]);
                Ok(Body::Polytope(whiten_polytope(&Polytope::new(v.clone())?, samples, s)?))
            }
            None => Ok(Body::Polytope(Polytope::cube(config.dim())?)),
        };
    }
    let name = match KindTag::parse(kind) {
        Some(KindTag::UniformCube) => "cube",
        Some(KindTag::UniformBall) => "ball",
        Some(KindTag::UniformSimplex) => "simplex",
        _ => kind,
    };
    Body::parse(name).ok_or_else(|| Error::InvalidArgument(format!("`{kind}` is not a convex body; use cube, ball, simplex or polytope")))
}

/// Intersection volumes of the isotropic body with `L_K√(εn)·B`. Defaults:
/// `ε ∈ {0.1, 0.25, 0.5, 1, 2, 4}`, `N = 10⁶`, `C''` from the constants table.
pub fn slicing(config: &ExperimentConfig) -> Result<Outcome> {
    let p = &config.params;
    let body = body_from(config)?;
    let n = match &body {
        Body::Polytope(poly) => poly.dim(),
        _ => config.dim(),
    };
    let eps = p.epsilons.clone().unwrap_or_else(|| vec![0.1, 0.25, 0.5, 1.0, 2.0, 4.0]);
    let samples = p.samples.unwrap_or(1_000_000);
    let tol = &config.tolerances;
    let r = slicing_report(&body, n, &eps, samples, config.constants.c_double_prime, tol.anisotropy, seed(config))?;
    let iso = isotropic_constant(&body, n, samples, tol.anisotropy, rng::derive_seed(seed(config), &[0]))?;

    let mut table = Table::new(&[
        "epsilon",
        "radius",
        "volume",
        "volume_stderr",
        "volume_ci_low",
        "volume_ci_high",
        "small_ball",
        "small_ball_ci_low",
        "small_ball_ci_high",
        "reference",
    ]);
    for row in &r.rows {
        table.push(vec![
            num(row.epsilon),
            num(row.radius),
            num(row.volume),
            num(row.volume_stderr),
            num(row.volume_ci.0),
            num(row.volume_ci.1),
            num(row.small_ball),
            num(row.small_ball_ci.0),
            num(row.small_ball_ci.1),
            num(row.reference),
        ]);
    }
    let mut checks = vec![Check::new("monotone_in_epsilon", r.monotone, format!("{} grid points", r.rows.len()))];
    // For a uniform body both constants are one quantity computed two ways.
    let allowed = if iso.stderr > 0.0 { tol.mc_sigmas * iso.stderr } else { tol.slicing_exact };
    checks.push(Check::compare("l_f_equals_l_k", (iso.l_f - iso.l_k).abs(), allowed, false));
    for row in &r.rows {
        let se = row.volume_stderr;
        let slack = if se > 0.0 { tol.mc_sigmas * se } else { tol.arithmetic };
        if matches!(body, Body::Cube) && n == 2 {
            // The volume-1 square has half-side 1/2.
            let exact = square_disc_area(0.5, row.radius);
            checks.push(Check::compare(format!("oracle eps={}", row.epsilon), (row.volume - exact).abs(), slack, false));
        }
    }
    let mut summary = serde_json::to_value(&r)?;
    if let Value::Object(m) = &mut summary {
        m.remove("rows");
        m.insert("isotropic_constant".into(), serde_json::to_value(&iso)?);
    }
    Ok(Outcome { table, checks, summary, warnings: vec![r.note.to_string()], report: None })
}
