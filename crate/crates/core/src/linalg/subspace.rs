use alloc::vec::Vec;

use super::matrix::{norm2, Matrix};
use crate::error::{invalid, Result};

/// Tolerance on `‖BᵀB − I‖_F` accepted by [`SubspaceBasis::new`].
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// A `p x r` matrix with orthonormal columns, standing for its span.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: Matrix,
}

impl SubspaceBasis {
    /// Validates orthonormality of the columns.
    pub fn new(basis: Matrix) -> Result<Self> {
        if !basis.is_finite() {
            return Err(invalid!("basis has non-finite entries"));
        }
        let gram = basis.tr_matmul(&basis)?;
        let defect = gram.sub(&Matrix::identity(basis.cols()))?.frobenius_norm();
        if defect > ORTHONORMALITY_TOL {
            return Err(invalid!(
                "basis columns are not orthonormal (defect {:e})",
                defect
            ));
        }
        Ok(SubspaceBasis { basis })
    }

    pub(crate) fn from_orthonormal(basis: Matrix) -> Self {
        SubspaceBasis { basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.basis
    }

    /// Coefficients `Uᵀy`.
    pub fn coefficients(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.basis.tr_mul_vec(y)
    }

    /// `‖UUᵀy‖ = ‖Uᵀy‖`.
    pub fn projected_norm(&self, y: &[f64]) -> Result<f64> {
        Ok(norm2(&self.coefficients(y)?))
    }

    /// Explicit `p x p` projector `UUᵀ`.
    pub fn projector(&self) -> Matrix {
        self.basis
            .matmul(&self.basis.transpose())
            .expect("shapes agree")
    }

    fn check_compatible(&self, other: &SubspaceBasis) -> Result<()> {
        if self.ambient_dim() != other.ambient_dim() || self.rank() != other.rank() {
            return Err(invalid!(
                "subspaces differ in shape: {}x{} vs {}x{}",
                self.ambient_dim(),
                self.rank(),
                other.ambient_dim(),
                other.rank()
            ));
        }
        Ok(())
    }

    /// `‖(I − UUᵀ)B‖_F`, the Frobenius norm of the sines of the principal angles.
    fn sin_theta_frobenius(&self, other: &SubspaceBasis) -> f64 {
        let coeffs = self.basis.tr_matmul(&other.basis).expect("shapes agree");
        let mut resid = other.basis.clone();
        let lifted = self.basis.matmul(&coeffs).expect("shapes agree");
        for j in 0..resid.cols() {
            for (x, &y) in resid.column_mut(j).iter_mut().zip(lifted.column(j)) {
                *x -= y;
            }
        }
        resid.frobenius_norm()
    }
}

/// `‖AAᵀ − BBᵀ‖_F` between two equal-rank subspaces, in `[0, √(2r)]`.
///
/// Evaluated as `√2 · ‖sin Θ(A, B)‖_F` from the explicit residuals
/// `(I − AAᵀ)B` and `(I − BBᵀ)A`, averaged so the result is exactly
/// symmetric. Unlike the trace identity this keeps full relative accuracy
/// for nearly equal subspaces.
pub fn projector_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    a.check_compatible(b)?;
    let s = 0.5 * (a.sin_theta_frobenius(b) + b.sin_theta_frobenius(a));
    let max = libm::sqrt(2.0 * a.rank() as f64);
    Ok((core::f64::consts::SQRT_2 * s).min(max))
}

/// The same distance through `√(2(r − ‖AᵀB‖_F²))`.
pub fn projector_distance_spectral(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    a.check_compatible(b)?;
    let cross = a.basis.tr_matmul(&b.basis)?;
    let f = cross.frobenius_norm();
    let v = 2.0 * (a.rank() as f64 - f * f);
    Ok(libm::sqrt(v.max(0.0)))
}

/// The same distance from explicitly formed `p x p` projectors.
pub fn projector_distance_explicit(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    a.check_compatible(b)?;
    Ok(a.projector().sub(&b.projector())?.frobenius_norm())
}

/// Splits `y` into `UUᵀy` and `(I − UUᵀ)y`.
pub fn project_split(u: &SubspaceBasis, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if y.len() != u.ambient_dim() {
        return Err(invalid!(
            "vector of length {} in ambient dimension {}",
            y.len(),
            u.ambient_dim()
        ));
    }
    let coeffs = u.coefficients(y)?;
    let in_span = u.basis.mul_vec(&coeffs)?;
    let residual = y.iter().zip(&in_span).map(|(a, b)| a - b).collect();
    Ok((in_span, residual))
}
