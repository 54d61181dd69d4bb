//! The single table of tolerances and reference constants.
//!
//! Every threshold used by a verdict lives here, so acceptance slack can be
//! audited in one place and overridden per run from a config file.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Empirical coordinate means must lie within `mean_sigmas/√N` of zero.
    pub mean_sigmas: f64,
    /// Relative error allowed on empirical second moments of isotropic laws.
    pub isotropy_rel: f64,
    /// Slack on the midpoint log-concavity inequality.
    pub midpoint_slack: f64,
    /// Slack around the `[1/2, 2]` covariance sandwich after conditioning.
    pub sandwich_slack: f64,
    /// `λ_max(A_t) ≤ 1/t + tol`, closed form and quadrature backends.
    pub covbound_exact: f64,
    /// Same bound for the sampling backend.
    pub covbound_sampling: f64,
    /// Ensemble standard errors allowed in martingale conservation.
    pub martingale_sigmas: f64,
    /// Binomial standard errors allowed below a probability guarantee.
    pub binomial_sigmas: f64,
    /// Standard errors allowed above the integrated shrinkage bound.
    pub shrinkage_sigmas: f64,
    /// Lower gate on `E Tr(A_{1/2}) / n`.
    pub guan_min_ratio: f64,
    /// Agreement with Gaussian closed forms.
    pub gaussian_exact: f64,
    /// Multiplicative slack on the `1/√t` subgaussian prediction.
    pub subgaussian_factor: f64,
    /// Ceiling on every Borell moment ratio (the working `C₀`).
    pub borell_max: f64,
    /// Minimal pooled small-ball exponent.
    pub fit_min_c: f64,
    /// Maximal RMS misfit of the pooled exponent model (natural log units).
    pub fit_max_residual: f64,
    /// Wilson intervals that must cover the exact value, out of the grid.
    pub wilson_min_cover: usize,
    /// Closed-form arithmetic.
    pub arithmetic: f64,
    /// Exact isotropic constants.
    pub slicing_exact: f64,
    /// Standard errors for Monte-Carlo agreement checks.
    pub mc_sigmas: f64,
    /// Relative anisotropy above which a body is declared non-isotropic.
    pub anisotropy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mean_sigmas: 4.0,
            isotropy_rel: 0.05,
            midpoint_slack: 1e-9,
            sandwich_slack: 0.05,
            covbound_exact: 0.02,
            covbound_sampling: 0.1,
            martingale_sigmas: 4.0,
            binomial_sigmas: 3.0,
            shrinkage_sigmas: 4.0,
            guan_min_ratio: 0.25,
            gaussian_exact: 1e-6,
            subgaussian_factor: 1.05,
            borell_max: 3.0,
            fit_min_c: 0.2,
            fit_max_residual: 0.5,
            wilson_min_cover: 10,
            arithmetic: 1e-12,
            slicing_exact: 1e-6,
            mc_sigmas: 3.0,
            anisotropy: 0.05,
        }
    }
}

/// Stand-ins for the non-explicit universal constants. They parameterize
/// reference curves only; no verdict treats them as true values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    /// Exponent constant of the Paouris-type bounds.
    pub c: f64,
    /// Exponent constant of the Lee–Vempala bound.
    pub c_b: f64,
    /// Time at which the trace lower bound is applied.
    pub c1: f64,
    /// Borell constant driving the reduction radius `2·C₀·√n`.
    pub c0: f64,
    /// Base of the corollary-form reference curve `(C''·√ε)ⁿ`.
    pub c_double_prime: f64,
    /// Multiplier in `Ψₙ² ≤ C·log n`.
    pub kls_c: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { c: 1.0, c_b: 1.0, c1: 0.5, c0: 3.0, c_double_prime: std::f64::consts::E, kls_c: 1.0 }
    }
}
