//! Numerical laboratory for stochastic localization on isotropic
//! log-concave measures and the small-ball probabilities it controls.
//!
//! The crate is organized bottom-up:
//!
//! * [`measures`]: exactly isotropic log-concave families with samplers,
//!   log-densities and analytic moments.
//! * [`reduction`]: symmetrization, conditioning to a ball and whitening.
//! * [`localization`]: the tilt SDE, tilted moments and path ensembles.
//! * [`analysis`]: small-ball estimators, closed-form bounds, lemma checks,
//!   certificate replay and isotropic-constant computations.
//! * [`runner`]: experiment configs, artifacts and the `replicate-all` suite.

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod localization;
pub mod measures;
pub mod quadrature;
pub mod reduction;
pub mod rng;
pub mod runner;
pub mod tolerances;

pub use error::{Error, Result};
pub use localization::{Backend, LocalizationPath, PathConfig, Region, TiltState, TiltedMoments};
pub use measures::{KindTag, LogConcaveFamily, Points};
