//! Estimators, closed-form bounds and checks built on the localization process.

pub mod bounds;
pub mod certificate;
pub mod checks;
pub mod diagnostics;
pub mod estimate;
pub mod fit;
pub mod slicing;

pub use bounds::{
    klartag_psi_sq, lee_vempala_bound, paouris_bound, projected_paouris_bound, select_subspace, BoundSpec,
};
pub use certificate::{assemble_certificate, CertificateParams, CertificateReport};
pub use checks::{covbound_check, guan_trace_check, martingale_check, shrinkage_check, symmetry_check};
pub use diagnostics::{borell_ratio, subgaussian_norm, RatioEstimate};
pub use estimate::{gaussian_small_ball_oracle, small_ball_estimate, wilson_interval, SmallBallEstimate};
pub use fit::{exponent_fit, ExponentFit};
pub use slicing::{isotropic_constant, slicing_report, square_disc_area, Body, Polytope};
