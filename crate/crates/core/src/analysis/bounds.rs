//! Closed-form small-ball bounds.
//!
//! The universal constants of these bounds are not known numerically, so
//! every evaluator takes them as explicit inputs. The values are reference
//! curves, not certified bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs of a Paouris-type bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    /// Eigenvalues of the covariance, descending and positive.
    pub spectrum: Vec<f64>,
    /// Subgaussian constant.
    pub b: f64,
    pub epsilon: f64,
    pub c_universal: f64,
    /// Proxy for the squared KLS constant; only the Lee–Vempala bound uses it.
    pub psi_sq: f64,
}

impl BoundSpec {
    pub fn new(spectrum: Vec<f64>, b: f64, epsilon: f64, c_universal: f64) -> Result<Self> {
        let spec = BoundSpec { spectrum, b, epsilon, c_universal, psi_sq: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_spectrum(&self.spectrum)?;
        if !(self.b > 0.0 && self.c_universal > 0.0 && self.psi_sq > 0.0) {
            return Err(Error::InvalidArgument("b, c and ψ² must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("ε must lie in (0,1), got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        self.spectrum.iter().sum()
    }

    fn lambda_max(&self) -> f64 {
        self.spectrum[0]
    }

    fn lambda_min(&self) -> f64 {
        *self.spectrum.last().expect("nonempty")
    }
}

fn check_spectrum(spectrum: &[f64]) -> Result<()> {
    if spectrum.is_empty() {
        return Err(Error::InvalidArgument("spectrum is empty".into()));
    }
    if spectrum.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("spectrum entries must be positive".into()));
    }
    if spectrum.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("spectrum must be sorted in descending order".into()));
    }
    Ok(())
}

/// The threshold `ε < c` of these bounds is not explicit; values above
/// one half are evaluated but flagged.
pub fn threshold_warning(epsilon: f64) -> Option<String> {
    (epsilon > 0.5).then(|| format!("ε = {epsilon} > 0.5 may exceed the (unspecified) validity threshold"))
}

/// `ε^{c·Tr(A) / (b²·‖A‖·‖A⁻¹‖)}`.
pub fn paouris_bound(spec: &BoundSpec) -> Result<f64> {
    spec.validate()?;
    let exponent =
        spec.c_universal * spec.trace() / (spec.b * spec.b * spec.lambda_max() / spec.lambda_min());
    Ok(spec.epsilon.powf(exponent))
}

/// `k = max(⌊Tr(A)/(2λ₁)⌋, 1)`: the top-`k` eigenspace keeps `λ_k ≥ Tr(A)/(2n)`.
pub fn select_subspace(spectrum: &[f64]) -> Result<usize> {
    check_spectrum(spectrum)?;
    let trace: f64 = spectrum.iter().sum();
    Ok(((trace / (2.0 * spectrum[0])).floor() as usize).max(1))
}

/// Exponent and base of the projected bound, for callers that need the parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectedBound {
    pub base: f64,
    pub exponent: f64,
    pub value: f64,
}

/// `(4n·λ₁·ε/Tr(A))^{c·Tr(A)³/(8n²·b²·λ₁²)}`, with `n` the spectrum length.
pub fn projected_paouris(spec: &BoundSpec) -> Result<ProjectedBound> {
    spec.validate()?;
    let n = spec.spectrum.len() as f64;
    let tr = spec.trace();
    let l1 = spec.lambda_max();
    let base = 4.0 * n * l1 * spec.epsilon / tr;
    let exponent = spec.c_universal * tr.powi(3) / (8.0 * n * n * spec.b * spec.b * l1 * l1);
    Ok(ProjectedBound { base, exponent, value: base.powf(exponent) })
}

pub fn projected_paouris_bound(spec: &BoundSpec) -> Result<f64> {
    Ok(projected_paouris(spec)?.value)
}

/// `ε^{c_B·n/(Ψ²·log n)}`.
pub fn lee_vempala_bound(n: usize, epsilon: f64, c_b: f64, psi_sq: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("the Lee–Vempala bound needs n ≥ 2, got {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || !(c_b > 0.0 && psi_sq > 0.0) {
        return Err(Error::InvalidArgument("need ε ∈ (0,1) and positive constants".into()));
    }
    let nf = n as f64;
    Ok(epsilon.powf(c_b * nf / (psi_sq * nf.ln())))
}

/// `Ψₙ² ≈ C·log n`, the best known growth of the KLS constant.
pub fn klartag_psi_sq(n: usize, c: f64) -> f64 {
    c * (n as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_spectrum() {
        assert!(select_subspace(&[1.0, 2.0]).is_err());
        assert!(BoundSpec::new(vec![1.0, 0.0], 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn warning_above_half() {
        assert!(threshold_warning(0.6).is_some());
        assert!(threshold_warning(0.5).is_none());
    }

    #[test]
    fn lee_vempala_needs_two_dimensions() {
        assert!(lee_vempala_bound(1, 0.1, 1.0, 1.0).is_err());
    }
}
