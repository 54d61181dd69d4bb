//! Exactly isotropic log-concave families.
//!
//! Every base family is centered with identity covariance by construction:
//! the cube is `[-√3, √3]ⁿ`, the ball has radius `√(n+2)`, the Laplace
//! factors have scale `1/√2` and the simplex is mapped to its isotropic
//! position through the closed-form covariance of the uniform measure on
//! the standard simplex. `Transformed` families wrap another family with an
//! affine map, a restriction to a centered ball, or symmetrization.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, operator_norm};
use crate::rng::{self, tag};

/// Proposals per acceptance-rate window of a rejection sampler.
pub const REJECTION_WINDOW: usize = 10_000;
/// A rejection sampler aborts when its windowed acceptance rate drops below this.
pub const MIN_ACCEPTANCE_RATE: f64 = 1e-3;
/// Points drawn per random stream; also the parallel work unit.
pub const CHUNK: usize = 4096;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindTag {
    Gaussian,
    UniformCube,
    UniformBall,
    UniformSimplex,
    ProductLaplace,
    Transformed,
}

impl KindTag {
    pub const BASE: [KindTag; 5] = [
        KindTag::Gaussian,
        KindTag::UniformCube,
        KindTag::UniformBall,
        KindTag::UniformSimplex,
        KindTag::ProductLaplace,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KindTag::Gaussian => "gaussian",
            KindTag::UniformCube => "uniform_cube",
            KindTag::UniformBall => "uniform_ball",
            KindTag::UniformSimplex => "uniform_simplex",
            KindTag::ProductLaplace => "product_laplace",
            KindTag::Transformed => "transformed",
        }
    }

    pub fn parse(name: &str) -> Option<KindTag> {
        Some(match name {
            "gaussian" | "normal" => KindTag::Gaussian,
            "uniform_cube" | "cube" => KindTag::UniformCube,
            "uniform_ball" | "ball" => KindTag::UniformBall,
            "uniform_simplex" | "simplex" => KindTag::UniformSimplex,
            "product_laplace" | "laplace" => KindTag::ProductLaplace,
            _ => return None,
        })
    }
}

impl fmt::Display for KindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which tilted-moment backends a family admits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityBackend {
    /// Gaussian (possibly affinely mapped): conjugate closed form.
    ClosedForm,
    /// Coordinate product: per-coordinate quadrature.
    Product,
    /// Log-density known, but only importance sampling applies.
    Density,
    /// Sampler only; log-density unavailable (e.g. symmetrized families).
    SampleOnly,
}

/// One coordinate factor of a product family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Factor1d {
    /// Standard normal.
    Gaussian,
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Density `∝ exp(-rate·|x|)`.
    Laplace { rate: f64 },
}

#[derive(Clone, Debug)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub shift: DVector<f64>,
    inverse: Option<DMatrix<f64>>,
    log_abs_det: f64,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != shift.len() {
            return Err(Error::InvalidArgument(format!(
                "affine map shape {}x{} does not match shift of length {}",
                matrix.nrows(),
                matrix.ncols(),
                shift.len()
            )));
        }
        let det = matrix.determinant();
        let inverse = if det.abs() > 1e-300 { matrix.clone().try_inverse() } else { None };
        Ok(AffineMap { log_abs_det: det.abs().ln(), inverse, matrix, shift })
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = self.shift[i];
            for j in 0..n {
                s += self.matrix[(i, j)] * x[j];
            }
            *o = s;
        }
    }
}

#[derive(Clone, Debug)]
pub enum Transform {
    Affine(AffineMap),
    /// Conditioning on the centered ball of the given radius.
    Restrict { radius: f64, slot: usize },
    /// `(X - X')/√2` with `X'` an independent copy.
    Symmetrize,
}

/// Isotropic position of the uniform measure on `{x ≥ 0, Σxᵢ ≤ 1}`.
#[derive(Clone, Debug)]
pub struct SimplexMap {
    mean: f64,
    whiten: DMatrix<f64>,
    unwhiten: DMatrix<f64>,
    log_volume: f64,
    circumradius: f64,
}

impl SimplexMap {
    fn new(n: usize) -> Self {
        // Cov = ((n+1) I - J) / ((n+1)²(n+2)): eigenvalue 1/D along the ones
        // vector and (n+1)/D on its complement.
        let nf = n as f64;
        let d = (nf + 1.0).powi(2) * (nf + 2.0);
        let ones = DMatrix::from_element(n, n, 1.0 / nf);
        let complement = DMatrix::identity(n, n) - &ones;
        let whiten = &complement * (d / (nf + 1.0)).sqrt() + &ones * d.sqrt();
        let unwhiten = &complement * ((nf + 1.0) / d).sqrt() + &ones * (1.0 / d).sqrt();
        // det(whiten) = (D/(n+1))^{(n-1)/2} · D^{1/2}
        let log_det = 0.5 * (nf - 1.0) * (d / (nf + 1.0)).ln() + 0.5 * d.ln();
        let log_volume = log_det - ln_gamma(nf + 1.0);
        let mean = 1.0 / (nf + 1.0);
        let mut circumradius: f64 = 0.0;
        let mut y = vec![0.0; n];
        for v in 0..=n {
            let x: Vec<f64> = (0..n).map(|i| if v == i + 1 { 1.0 } else { 0.0 } - mean).collect();
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = (0..n).map(|j| whiten[(i, j)] * x[j]).sum();
            }
            circumradius = circumradius.max(norm_sq(&y).sqrt());
        }
        SimplexMap { mean, whiten, unwhiten, log_volume, circumradius }
    }

    fn contains(&self, y: &[f64]) -> bool {
        let n = y.len();
        let mut total = 0.0;
        for i in 0..n {
            let xi = self.mean + (0..n).map(|j| self.unwhiten[(i, j)] * y[j]).sum::<f64>();
            if xi < -1e-12 {
                return false;
            }
            total += xi;
        }
        total <= 1.0 + 1e-12
    }
}

#[derive(Clone, Debug)]
pub enum Kind {
    Gaussian,
    UniformCube,
    UniformBall,
    UniformSimplex(Arc<SimplexMap>),
    ProductLaplace,
    Transformed { base: Arc<LogConcaveFamily>, transform: Transform },
}

/// Analytic mean and covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// A flat batch of points in ℝⁿ, one row per point.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len() % dim == 0, "ragged point buffer");
        Points { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_vectors(&self) -> Vec<DVector<f64>> {
        self.rows().map(DVector::from_column_slice).collect()
    }
}

/// Per-call state of the rejection samplers: one acceptance window per
/// restriction node in the family tree.
#[derive(Debug)]
pub struct SamplerState {
    windows: Vec<(usize, usize)>,
}

impl SamplerState {
    pub fn for_family(family: &LogConcaveFamily) -> Self {
        SamplerState { windows: vec![(0, 0); family.restrict_slots] }
    }

    fn record(&mut self, slot: usize, accepted: bool) -> Result<()> {
        let w = &mut self.windows[slot];
        w.0 += 1;
        w.1 += usize::from(accepted);
        if w.0 == REJECTION_WINDOW {
            let rate = w.1 as f64 / REJECTION_WINDOW as f64;
            *w = (0, 0);
            if rate < MIN_ACCEPTANCE_RATE {
                return Err(Error::RejectionStall { rate, window: REJECTION_WINDOW });
            }
        }
        Ok(())
    }
}

/// A named isotropic (or transformed) log-concave distribution. Immutable
/// once built; cheap to clone.
#[derive(Clone, Debug)]
pub struct LogConcaveFamily {
    name: String,
    dim: usize,
    kind: Kind,
    support_radius: Option<f64>,
    restrict_slots: usize,
}

impl LogConcaveFamily {
    fn base(kind: Kind, tag: KindTag, dim: usize, support_radius: Option<f64>) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        LogConcaveFamily {
            name: tag.as_str().to_string(),
            dim,
            kind,
            support_radius,
            restrict_slots: 0,
        }
    }

    pub fn gaussian(n: usize) -> Self {
        Self::base(Kind::Gaussian, KindTag::Gaussian, n, None)
    }

    pub fn uniform_cube(n: usize) -> Self {
        Self::base(Kind::UniformCube, KindTag::UniformCube, n, Some((3.0 * n as f64).sqrt()))
    }

    pub fn uniform_ball(n: usize) -> Self {
        Self::base(Kind::UniformBall, KindTag::UniformBall, n, Some((n as f64 + 2.0).sqrt()))
    }

    pub fn uniform_simplex(n: usize) -> Self {
        let map = SimplexMap::new(n);
        let r = map.circumradius;
        Self::base(Kind::UniformSimplex(Arc::new(map)), KindTag::UniformSimplex, n, Some(r))
    }

    pub fn product_laplace(n: usize) -> Self {
        Self::base(Kind::ProductLaplace, KindTag::ProductLaplace, n, None)
    }

    pub fn from_tag(tag: KindTag, n: usize) -> Result<Self> {
        Ok(match tag {
            KindTag::Gaussian => Self::gaussian(n),
            KindTag::UniformCube => Self::uniform_cube(n),
            KindTag::UniformBall => Self::uniform_ball(n),
            KindTag::UniformSimplex => Self::uniform_simplex(n),
            KindTag::ProductLaplace => Self::product_laplace(n),
            KindTag::Transformed => {
                return Err(Error::InvalidArgument(
                    "a transformed family needs a base family".into(),
                ))
            }
        })
    }

    /// All five base families in dimension `n`.
    pub fn zoo(n: usize) -> Vec<Self> {
        KindTag::BASE.iter().map(|&k| Self::from_tag(k, n).expect("base kind")).collect()
    }

    /// Law of `M X + v`.
    pub fn affine(base: &LogConcaveFamily, matrix: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        if matrix.nrows() != base.dim {
            return Err(Error::InvalidArgument(format!(
                "affine map of size {} applied to a family of dimension {}",
                matrix.nrows(),
                base.dim
            )));
        }
        let map = AffineMap::new(matrix, shift)?;
        let support_radius =
            base.support_radius.map(|r| operator_norm(&map.matrix) * r + map.shift.norm());
        Ok(LogConcaveFamily {
            name: format!("affine({})", base.name),
            dim: base.dim,
            support_radius,
            restrict_slots: base.restrict_slots,
            kind: Kind::Transformed { base: Arc::new(base.clone()), transform: Transform::Affine(map) },
        })
    }

    /// Law of `X | |X| ≤ radius`.
    pub fn restricted(base: &LogConcaveFamily, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("restriction radius must be positive, got {radius}")));
        }
        let support_radius = Some(base.support_radius.map_or(radius, |r| r.min(radius)));
        Ok(LogConcaveFamily {
            name: format!("restrict({},{})", base.name, radius),
            dim: base.dim,
            support_radius,
            restrict_slots: base.restrict_slots + 1,
            kind: Kind::Transformed {
                base: Arc::new(base.clone()),
                transform: Transform::Restrict { radius, slot: base.restrict_slots },
            },
        })
    }

    /// Law of `(X - X')/√2`.
    pub fn symmetrized(base: &LogConcaveFamily) -> Self {
        LogConcaveFamily {
            name: format!("sym({})", base.name),
            dim: base.dim,
            support_radius: base.support_radius.map(|r| SQRT_2 * r),
            restrict_slots: base.restrict_slots,
            kind: Kind::Transformed { base: Arc::new(base.clone()), transform: Transform::Symmetrize },
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn kind_tag(&self) -> KindTag {
        match self.kind {
            Kind::Gaussian => KindTag::Gaussian,
            Kind::UniformCube => KindTag::UniformCube,
            Kind::UniformBall => KindTag::UniformBall,
            Kind::UniformSimplex(_) => KindTag::UniformSimplex,
            Kind::ProductLaplace => KindTag::ProductLaplace,
            Kind::Transformed { .. } => KindTag::Transformed,
        }
    }

    /// Radius `R` with support inside `B₂(0, R)`; `None` when unbounded.
    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn exact_moments_available(&self) -> bool {
        self.exact_moments().is_some()
    }

    pub fn density_backend(&self) -> DensityBackend {
        if self.gaussian_parameters().is_some() {
            return DensityBackend::ClosedForm;
        }
        if self.product_factor().is_some() {
            return DensityBackend::Product;
        }
        match &self.kind {
            Kind::Transformed { base, transform: Transform::Affine(map) } => {
                if map.inverse.is_some() && base.density_backend() != DensityBackend::SampleOnly {
                    DensityBackend::Density
                } else {
                    DensityBackend::SampleOnly
                }
            }
            Kind::Transformed { base, transform: Transform::Restrict { .. } } => match base.density_backend() {
                DensityBackend::SampleOnly => DensityBackend::SampleOnly,
                _ => DensityBackend::Density,
            },
            Kind::Transformed { transform: Transform::Symmetrize, .. } => DensityBackend::SampleOnly,
            _ => DensityBackend::Density,
        }
    }

    /// The common coordinate factor when the family is a product of i.i.d.
    /// one-dimensional laws.
    pub fn product_factor(&self) -> Option<Factor1d> {
        match self.kind {
            Kind::Gaussian => Some(Factor1d::Gaussian),
            Kind::UniformCube => Some(Factor1d::Uniform { half_width: SQRT_3 }),
            Kind::ProductLaplace => Some(Factor1d::Laplace { rate: SQRT_2 }),
            _ => None,
        }
    }

    /// Mean and covariance when the law is Gaussian with invertible covariance.
    pub fn gaussian_parameters(&self) -> Option<Moments> {
        match &self.kind {
            Kind::Gaussian => Some(Moments {
                mean: DVector::zeros(self.dim),
                covariance: DMatrix::identity(self.dim, self.dim),
            }),
            Kind::Transformed { base, transform: Transform::Affine(map) } if map.inverse.is_some() => {
                let m = base.gaussian_parameters()?;
                Some(Moments {
                    mean: &map.matrix * m.mean + &map.shift,
                    covariance: &map.matrix * m.covariance * map.matrix.transpose(),
                })
            }
            _ => None,
        }
    }

    /// Whether `X` and `-X` have the same law.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            Kind::UniformSimplex(_) => false,
            Kind::Transformed { base, transform } => match transform {
                Transform::Symmetrize => true,
                Transform::Restrict { .. } => base.is_symmetric(),
                Transform::Affine(map) => map.shift.iter().all(|&v| v == 0.0) && base.is_symmetric(),
            },
            _ => true,
        }
    }

    /// Unnormalized `log f(x)`, `-∞` outside the support.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        debug_assert_eq!(x.len(), self.dim);
        Ok(match &self.kind {
            Kind::Gaussian => -0.5 * norm_sq(x),
            Kind::UniformCube => {
                if x.iter().all(|v| v.abs() <= SQRT_3) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::UniformBall => {
                if norm_sq(x) <= self.dim as f64 + 2.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::UniformSimplex(map) => {
                if map.contains(x) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::ProductLaplace => -SQRT_2 * x.iter().map(|v| v.abs()).sum::<f64>(),
            Kind::Transformed { base, transform } => match transform {
                Transform::Affine(map) => {
                    let inv = map.inverse.as_ref().ok_or_else(|| self.unavailable())?;
                    let centered: Vec<f64> = x.iter().zip(map.shift.iter()).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = (0..self.dim)
                        .map(|i| (0..self.dim).map(|j| inv[(i, j)] * centered[j]).sum())
                        .collect();
                    base.log_density(&y)?
                }
                Transform::Restrict { radius, .. } => {
                    if norm_sq(x) <= radius * radius {
                        base.log_density(x)?
                    } else {
                        f64::NEG_INFINITY
                    }
                }
                Transform::Symmetrize => return Err(self.unavailable()),
            },
        })
    }

    /// Additive constant turning `log_density` into the normalized log-density.
    pub fn log_normalizer(&self) -> Option<f64> {
        let n = self.dim as f64;
        match &self.kind {
            Kind::Gaussian => Some(-0.5 * n * (2.0 * PI).ln()),
            Kind::UniformCube => Some(-n * (2.0 * SQRT_3).ln()),
            Kind::UniformBall => Some(-log_ball_volume(self.dim, (n + 2.0).sqrt())),
            Kind::UniformSimplex(map) => Some(-map.log_volume),
            Kind::ProductLaplace => Some(-0.5 * n * 2f64.ln()),
            Kind::Transformed { base, transform: Transform::Affine(map) } => {
                map.inverse.as_ref()?;
                Some(base.log_normalizer()? - map.log_abs_det)
            }
            Kind::Transformed { base, transform: Transform::Restrict { radius, .. } } => {
                // Vacuous restriction keeps the normalization.
                match base.support_radius {
                    Some(r) if r <= *radius => base.log_normalizer(),
                    _ => None,
                }
            }
            Kind::Transformed { transform: Transform::Symmetrize, .. } => None,
        }
    }

    /// Normalized log-density when the normalizer is known.
    pub fn log_density_normalized(&self, x: &[f64]) -> Result<f64> {
        let z = self.log_normalizer().ok_or_else(|| self.unavailable())?;
        Ok(self.log_density(x)? + z)
    }

    pub fn exact_moments(&self) -> Option<Moments> {
        let n = self.dim;
        match &self.kind {
            Kind::Transformed { base, transform } => match transform {
                Transform::Affine(map) => {
                    let m = base.exact_moments()?;
                    Some(Moments {
                        mean: &map.matrix * m.mean + &map.shift,
                        covariance: &map.matrix * m.covariance * map.matrix.transpose(),
                    })
                }
                Transform::Restrict { radius, .. } => match base.support_radius {
                    Some(r) if r <= *radius => base.exact_moments(),
                    _ => None,
                },
                Transform::Symmetrize => {
                    let m = base.exact_moments()?;
                    Some(Moments { mean: DVector::zeros(n), covariance: m.covariance })
                }
            },
            _ => Some(Moments { mean: DVector::zeros(n), covariance: DMatrix::identity(n, n) }),
        }
    }

    fn unavailable(&self) -> Error {
        Error::DensityUnavailable { family: self.name.clone() }
    }

    /// Draw one point into `out`.
    pub fn sample_point<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        state: &mut SamplerState,
        out: &mut [f64],
    ) -> Result<()> {
        let n = self.dim;
        match &self.kind {
            Kind::Gaussian => {
                for o in out.iter_mut() {
                    *o = rng.sample(StandardNormal);
                }
            }
            Kind::UniformCube => {
                for o in out.iter_mut() {
                    *o = rng.random_range(-SQRT_3..SQRT_3);
                }
            }
            Kind::UniformBall => {
                let mut s = 0.0;
                for o in out.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *o = g;
                    s += g * g;
                }
                let u: f64 = rng.random();
                let r = (n as f64 + 2.0).sqrt() * u.powf(1.0 / n as f64);
                let scale = r / s.sqrt();
                out.iter_mut().for_each(|o| *o *= scale);
            }
            Kind::UniformSimplex(map) => {
                // First n coordinates of a flat Dirichlet on n+1 atoms.
                let mut e = vec![0.0; n + 1];
                let mut total = 0.0;
                for v in e.iter_mut() {
                    *v = rng.sample::<f64, _>(Exp1);
                    total += *v;
                }
                for (i, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += map.whiten[(i, j)] * (e[j + 1] / total - map.mean);
                    }
                    *o = s;
                }
            }
            Kind::ProductLaplace => {
                let scale = 1.0 / SQRT_2;
                for o in out.iter_mut() {
                    let mag: f64 = rng.sample(Exp1);
                    *o = if rng.random::<bool>() { mag * scale } else { -mag * scale };
                }
            }
            Kind::Transformed { base, transform } => match transform {
                Transform::Affine(map) => {
                    let mut tmp = vec![0.0; n];
                    base.sample_point(rng, state, &mut tmp)?;
                    map.apply(&tmp, out);
                }
                Transform::Restrict { radius, slot } => {
                    let r2 = radius * radius;
                    loop {
                        base.sample_point(rng, state, out)?;
                        let accepted = norm_sq(out) <= r2;
                        state.record(*slot, accepted)?;
                        if accepted {
                            break;
                        }
                    }
                }
                Transform::Symmetrize => {
                    let mut other = vec![0.0; n];
                    base.sample_point(rng, state, out)?;
                    base.sample_point(rng, state, &mut other)?;
                    for (o, b) in out.iter_mut().zip(&other) {
                        *o = (*o - b) / SQRT_2;
                    }
                }
            },
        }
        Ok(())
    }

    /// `count` points, a pure function of `(self, count, seed)`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Points> {
        let chunks = self.sample_chunks(count, seed, |p| p.as_slice().to_vec())?;
        Ok(Points::new(self.dim, chunks.concat()))
    }

    /// Draw `count` points in fixed-size chunks, each from its own stream,
    /// and map every chunk in parallel. Results come back in chunk order.
    pub fn sample_chunks<T, F>(&self, count: usize, seed: u64, map: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&Points) -> T + Sync,
    {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let n_chunks = count.div_ceil(CHUNK);
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(count - c * CHUNK);
                let points = self.sample_chunk(len, seed, c as u64)?;
                Ok(map(&points))
            })
            .collect()
    }

    fn sample_chunk(&self, len: usize, seed: u64, chunk: u64) -> Result<Points> {
        let mut rng = rng::stream(seed, &[tag::SAMPLE, chunk]);
        let mut state = SamplerState::for_family(self);
        let mut data = vec![0.0; len * self.dim];
        for row in data.chunks_exact_mut(self.dim) {
            self.sample_point(&mut rng, &mut state, row)?;
        }
        Ok(Points::new(self.dim, data))
    }
}

/// `log Vol(B₂(0, r))` in dimension `n`.
pub fn log_ball_volume(n: usize, r: f64) -> f64 {
    let nf = n as f64;
    0.5 * nf * PI.ln() - ln_gamma(0.5 * nf + 1.0) + nf * r.ln()
}

/// Empirical mean and covariance (normalized by `N`, symmetrized exactly).
pub fn empirical_moments(points: &Points) -> Moments {
    let n = points.dim();
    let count = points.len() as f64;
    let mut mean = DVector::zeros(n);
    for row in points.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean /= count;
    let mut cov = DMatrix::zeros(n, n);
    let mut c = vec![0.0; n];
    for row in points.rows() {
        for i in 0..n {
            c[i] = row[i] - mean[i];
        }
        for i in 0..n {
            for j in 0..=i {
                cov[(i, j)] += c[i] * c[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Moments { mean, covariance: cov / count }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_log_density_at_origin() {
        let g = LogConcaveFamily::gaussian(1);
        assert_abs_diff_eq!(g.log_density_normalized(&[0.0]).unwrap(), -0.5 * (2.0 * PI).ln(), epsilon = 1e-15);
    }

    #[test]
    fn cube_outside_support() {
        let c = LogConcaveFamily::uniform_cube(2);
        assert_eq!(c.log_density(&[5.0, 0.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn laplace_log_density_difference() {
        let l = LogConcaveFamily::product_laplace(2);
        let d = l.log_density(&[1.0, 1.0]).unwrap() - l.log_density(&[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(d, -2.0 * SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn affine_gaussian_moments() {
        let g = LogConcaveFamily::gaussian(2);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let v = DVector::from_vec(vec![0.5, -1.0]);
        let t = LogConcaveFamily::affine(&g, m.clone(), v.clone()).unwrap();
        let mo = t.exact_moments().unwrap();
        assert_eq!(mo.mean, v);
        assert_eq!(mo.covariance, &m * m.transpose());
        assert_eq!(t.density_backend(), DensityBackend::ClosedForm);
    }

    #[test]
    fn symmetrized_density_unavailable() {
        let s = LogConcaveFamily::symmetrized(&LogConcaveFamily::uniform_cube(2));
        assert!(matches!(s.log_density(&[0.0, 0.0]), Err(Error::DensityUnavailable { .. })));
        assert_eq!(s.density_backend(), DensityBackend::SampleOnly);
        assert!(s.exact_moments_available());
    }

    #[test]
    fn simplex_volume_matches_normalizer() {
        // Uniform density integrates to one: volume of the isotropic simplex
        // is det(whiten)/n!, cross-checked against a direct determinant.
        for n in 1..6 {
            let map = SimplexMap::new(n);
            let det = map.whiten.determinant().ln() - ln_gamma(n as f64 + 1.0);
            assert_abs_diff_eq!(det, map.log_volume, epsilon = 1e-10);
            let prod = &map.whiten * &map.unwhiten;
            assert!((prod - DMatrix::<f64>::identity(n, n)).norm() < 1e-10);
        }
    }

    #[test]
    fn rejection_stall_is_reported() {
        let g = LogConcaveFamily::gaussian(8);
        let r = LogConcaveFamily::restricted(&g, 0.05).unwrap();
        match r.sample(1, 3) {
            Err(Error::RejectionStall { rate, window }) => {
                assert!(rate < MIN_ACCEPTANCE_RATE);
                assert_eq!(window, REJECTION_WINDOW);
            }
            other => panic!("expected a stall, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_points_give_zero_covariance() {
        let p = Points::new(3, vec![1.0; 9]);
        let m = empirical_moments(&p);
        assert_eq!(m.covariance, DMatrix::zeros(3, 3));
    }
}
