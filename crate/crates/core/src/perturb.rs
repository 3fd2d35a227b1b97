//! Leave-one-column-out perturbation bounds for leading left singular
//! subspaces, and the exact distance they bound.
//!
//! Throughout, `Y` is the data with one column removed and `y` the removed
//! column; `U_r` spans the leading `r` left singular vectors of `Y` and
//! `res = ‖(I − U_r U_rᵀ)y‖`. A bound whose gate fails is reported with
//! `value = None` rather than as an error.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use crate::error::{invalid, Result};
use crate::linalg::{norm2, project_split, projector_distance, thin_svd, Matrix, Svd};
use crate::mixture::{diagnostics, DiagnosticQuantities, MixtureInstance};

const MIXTURE_CONSTANT: f64 = 128.0;
const MIXTURE_GAP_GATE: f64 = 16.0;
const MIXTURE_SIZE_GATE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Wedin,
    LooGeneral,
    LooRelaxed,
    MixtureKappa,
    MixtureR,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub kind: BoundKind,
    /// `None` when the gate fails.
    pub value: Option<f64>,
    /// The gating quantity: `ρ` for the general bounds,
    /// `σ_r² − σ_{r+1}² − res²` for the relaxed one, `ρ₀` / `ρ̃₀` for the mixture bounds.
    pub condition_value: f64,
}

impl BoundValue {
    pub fn applicable(&self) -> bool {
        self.value.is_some()
    }
}

/// The pieces of `(Y, y)` every general bound is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnGeometry {
    /// `u_jᵀ y` for `j = 1..=r`.
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub sigma_r: f64,
    pub sigma_next: f64,
}

impl ColumnGeometry {
    pub fn new(svd_of_y: &Svd, y: &[f64], r: usize) -> Result<Self> {
        if r == 0 {
            return Err(invalid!("rank must be at least 1"));
        }
        if y.len() != svd_of_y.left.rows() {
            return Err(invalid!(
                "column of length {} against a {}-row matrix",
                y.len(),
                svd_of_y.left.rows()
            ));
        }
        if r > svd_of_y.min_dim {
            return Err(invalid!(
                "rank {} exceeds min(p, n − 1) = {}",
                r,
                svd_of_y.min_dim
            ));
        }
        let sigma_next = svd_of_y
            .sigma(r + 1)
            .ok_or_else(|| invalid!("decomposition was truncated before σ_{}", r + 1))?;
        let basis = svd_of_y.leading_basis(r)?;
        let (_, residual) = project_split(&basis, y)?;
        Ok(ColumnGeometry {
            coefficients: basis.coefficients(y)?,
            residual_norm: norm2(&residual),
            sigma_r: svd_of_y.singular_values[r - 1],
            sigma_next,
        })
    }

    pub fn gap(&self) -> f64 {
        self.sigma_r - self.sigma_next
    }

    /// `ρ = gap / res`, `+∞` for a zero residual with a positive gap.
    pub fn rho(&self) -> f64 {
        if self.residual_norm == 0.0 {
            if self.gap() > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            self.gap() / self.residual_norm
        }
    }

    /// `√Σ (u_jᵀy / σ_j)²`.
    fn weighted_coefficients(&self, sigmas: &[f64]) -> Result<f64> {
        if self.sigma_r <= 0.0 {
            return Err(invalid!("σ_r = 0: the leading subspace is degenerate"));
        }
        let scaled: Vec<f64> = self
            .coefficients
            .iter()
            .zip(sigmas)
            .map(|(c, s)| c / s)
            .collect();
        Ok(norm2(&scaled))
    }
}

/// `2 res / (σ_r − σ_{r+1})`, applicable iff the gap exceeds `2 res`.
pub fn wedin_bound(svd_of_y: &Svd, y: &[f64], r: usize) -> Result<BoundValue> {
    Ok(wedin_from(&ColumnGeometry::new(svd_of_y, y, r)?))
}

fn wedin_from(g: &ColumnGeometry) -> BoundValue {
    let gap = g.gap();
    let value = (gap > 2.0 * g.residual_norm).then(|| 2.0 * g.residual_norm / gap);
    BoundValue {
        kind: BoundKind::Wedin,
        value,
        condition_value: g.rho(),
    }
}

/// `(4√2 / ρ) √Σ (u_jᵀy / σ_j)²`, applicable iff `ρ > 2`.
pub fn loo_bound(svd_of_y: &Svd, y: &[f64], r: usize) -> Result<BoundValue> {
    let g = ColumnGeometry::new(svd_of_y, y, r)?;
    loo_from(&g, &svd_of_y.singular_values[..r])
}

fn loo_from(g: &ColumnGeometry, sigmas: &[f64]) -> Result<BoundValue> {
    let s = g.weighted_coefficients(sigmas)?;
    let rho = g.rho();
    let value = (rho > 2.0).then(|| {
        if rho.is_infinite() {
            0.0
        } else {
            4.0 * SQRT_2 / rho * s
        }
    });
    Ok(BoundValue {
        kind: BoundKind::LooGeneral,
        value,
        condition_value: rho,
    })
}

/// `2√2 σ_r res √Σ (u_jᵀy / σ_j)² / (σ_r² − σ_{r+1}² − res²)`, applicable iff
/// the denominator is positive.
pub fn loo_bound_relaxed(svd_of_y: &Svd, y: &[f64], r: usize) -> Result<BoundValue> {
    let g = ColumnGeometry::new(svd_of_y, y, r)?;
    relaxed_from(&g, &svd_of_y.singular_values[..r])
}

fn relaxed_from(g: &ColumnGeometry, sigmas: &[f64]) -> Result<BoundValue> {
    let s = g.weighted_coefficients(sigmas)?;
    let res = g.residual_norm;
    let denom = g.sigma_r * g.sigma_r - g.sigma_next * g.sigma_next - res * res;
    let value = (denom > 0.0).then(|| 2.0 * SQRT_2 * g.sigma_r * res * s / denom);
    Ok(BoundValue {
        kind: BoundKind::LooRelaxed,
        value,
        condition_value: denom,
    })
}

/// `‖Û_r Û_rᵀ − Û_{−i,r} Û_{−i,r}ᵀ‖_F` for the leading `r` left subspaces of
/// `x` and of `x` without column `i` (0-based).
pub fn actual_loo_distance(x: &Matrix, i: usize, r: usize) -> Result<f64> {
    let y = x.leave_one_out(i)?;
    check_rank(x, r)?;
    let full = thin_svd(x, Some(r))?.leading_basis(r)?;
    let loo = thin_svd(&y, Some(r))?.leading_basis(r)?;
    projector_distance(&full, &loo)
}

fn check_rank(x: &Matrix, r: usize) -> Result<()> {
    let limit = x.rows().min(x.cols() - 1);
    if r == 0 || r > limit {
        return Err(invalid!("rank {} outside 1..=min(p, n − 1) = {}", r, limit));
    }
    Ok(())
}

/// Ground-truth constants shared by the mixture bounds of every column.
#[derive(Debug, Clone)]
pub struct MixtureGates {
    pub diagnostics: DiagnosticQuantities,
    pub k: usize,
    pub n: usize,
}

impl MixtureGates {
    pub fn new(inst: &MixtureInstance) -> Result<Self> {
        let diagnostics = diagnostics(inst)?;
        if diagnostics.kappa == 0 {
            return Err(invalid!("the signal matrix is zero (κ = 0)"));
        }
        Ok(MixtureGates {
            diagnostics,
            k: inst.k(),
            n: inst.n(),
        })
    }

    fn beta_n(&self) -> f64 {
        self.diagnostics.beta * self.n as f64
    }

    /// `βn/k² ≥ 10`.
    pub fn size_gate(&self) -> bool {
        self.beta_n() / (self.k * self.k) as f64 >= MIXTURE_SIZE_GATE
    }

    pub fn kappa(&self) -> usize {
        self.diagnostics.kappa
    }

    /// `(128/ρ₀)(√(kκ/βn) + loo_noise/λ_κ)`, gated on `ρ₀ > 16` and `βn/k² ≥ 10`.
    /// `loo_noise` is `‖Û_{−i,1:κ}ᵀ ε_i‖`.
    pub fn kappa_bound(&self, loo_noise: f64) -> BoundValue {
        let d = &self.diagnostics;
        let kappa = d.kappa;
        let rho0 = d.rho0;
        let value = (rho0 > MIXTURE_GAP_GATE && self.size_gate())
            .then(|| self.formula(rho0, kappa, loo_noise, d.lambda_at(kappa)));
        BoundValue {
            kind: BoundKind::MixtureKappa,
            value,
            condition_value: rho0,
        }
    }

    /// `ρ̃₀ = (λ_r − λ_{r+1}) / max(‖E‖, √(k²/βn) λ_{r+1})`.
    pub fn tilde_rho0(&self, r: usize) -> f64 {
        let d = &self.diagnostics;
        let (lr, lnext) = (d.lambda_at(r), d.lambda_at(r + 1));
        let den = d
            .e_opnorm
            .max(libm::sqrt((self.k * self.k) as f64 / self.beta_n()) * lnext);
        if den == 0.0 {
            if lr - lnext > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            (lr - lnext) / den
        }
    }

    /// `(128/ρ̃₀)(√(kr/βn) + loo_noise/λ_r)`, gated on `ρ̃₀ > 16` and `βn/k² ≥ 10`.
    /// `loo_noise` is `‖Û_{−i,1:r}ᵀ ε_i‖`.
    pub fn r_bound(&self, r: usize, loo_noise: f64) -> Result<BoundValue> {
        if r == 0 || r > self.k {
            return Err(invalid!("rank {} outside 1..={}", r, self.k));
        }
        let rho = self.tilde_rho0(r);
        let value = (rho > MIXTURE_GAP_GATE && self.size_gate())
            .then(|| self.formula(rho, r, loo_noise, self.diagnostics.lambda_at(r)));
        Ok(BoundValue {
            kind: BoundKind::MixtureR,
            value,
            condition_value: rho,
        })
    }

    fn formula(&self, rho: f64, r: usize, loo_noise: f64, lambda_r: f64) -> f64 {
        if rho.is_infinite() {
            return 0.0;
        }
        let structural = libm::sqrt((self.k * r) as f64 / self.beta_n());
        MIXTURE_CONSTANT / rho * (structural + loo_noise / lambda_r)
    }
}

/// `‖Û_{−i,1:r}ᵀ ε_i‖` from the leave-one-out SVD of `X`.
pub fn loo_noise_norm(inst: &MixtureInstance, i: usize, r: usize) -> Result<f64> {
    let y = inst.x.leave_one_out(i)?;
    check_rank(&inst.x, r)?;
    let basis = thin_svd(&y, Some(r))?.leading_basis(r)?;
    basis.projected_norm(inst.noise.column(i))
}

/// The κ-rank mixture bound for column `i` (0-based).
pub fn mixture_loo_bound(inst: &MixtureInstance, i: usize) -> Result<BoundValue> {
    let gates = MixtureGates::new(inst)?;
    let noise = loo_noise_norm(inst, i, gates.kappa())?;
    Ok(gates.kappa_bound(noise))
}

/// The rank-`r` mixture bound for column `i` (0-based).
pub fn mixture_loo_bound_r(inst: &MixtureInstance, i: usize, r: usize) -> Result<BoundValue> {
    let gates = MixtureGates::new(inst)?;
    if r == 0 || r > gates.k {
        return Err(invalid!("rank {} outside 1..={}", r, gates.k));
    }
    let noise = loo_noise_norm(inst, i, r)?;
    gates.r_bound(r, noise)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// 0-based.
    pub column_index: usize,
    pub actual_distance: f64,
    pub bounds: Vec<BoundValue>,
    pub residual_norm: f64,
    pub in_span_coeffs: Vec<f64>,
    pub spectral_gap: f64,
    /// `ρ` of the general bounds.
    pub rho: f64,
}

impl BoundReport {
    pub fn bound(&self, kind: BoundKind) -> Option<&BoundValue> {
        self.bounds.iter().find(|b| b.kind == kind)
    }
}

/// Everything needed to build reports column by column (possibly in parallel).
#[derive(Debug, Clone)]
pub struct ReportContext<'a> {
    x: &'a Matrix,
    r: usize,
    full_basis: crate::linalg::SubspaceBasis,
    mixture: Option<(&'a MixtureInstance, MixtureGates)>,
}

impl<'a> ReportContext<'a> {
    pub fn new(x: &'a Matrix, r: usize, inst: Option<&'a MixtureInstance>) -> Result<Self> {
        if x.cols() < 2 {
            return Err(invalid!("need at least two columns (got {})", x.cols()));
        }
        check_rank(x, r)?;
        let mixture = match inst {
            Some(inst) => {
                if inst.x.shape() != x.shape() {
                    return Err(invalid!("instance shape differs from the data matrix"));
                }
                Some((inst, MixtureGates::new(inst)?))
            }
            None => None,
        };
        Ok(ReportContext {
            x,
            r,
            full_basis: thin_svd(x, Some(r))?.leading_basis(r)?,
            mixture,
        })
    }

    pub fn columns(&self) -> usize {
        self.x.cols()
    }

    /// Report for column `i` (0-based).
    pub fn column(&self, i: usize) -> Result<BoundReport> {
        let r = self.r;
        let y_mat = self.x.leave_one_out(i)?;
        let y = self.x.column(i);
        // r + 1 triplets so that σ_{r+1} is available
        let keep = (r + 1).min(y_mat.rows().min(y_mat.cols()));
        let svd = thin_svd(&y_mat, Some(keep))?;
        let g = ColumnGeometry::new(&svd, y, r)?;
        let loo_basis = svd.leading_basis(r)?;
        let actual = projector_distance(&self.full_basis, &loo_basis)?;
        let sigmas = &svd.singular_values[..r];
        let mut bounds = alloc::vec![
            wedin_from(&g),
            loo_from(&g, sigmas)?,
            relaxed_from(&g, sigmas)?
        ];
        if let Some((inst, gates)) = &self.mixture {
            let noise = loo_basis.projected_norm(inst.noise.column(i))?;
            if r == gates.kappa() {
                bounds.push(gates.kappa_bound(noise));
            }
            if r <= gates.k {
                bounds.push(gates.r_bound(r, noise)?);
            }
        }
        Ok(BoundReport {
            column_index: i,
            actual_distance: actual,
            rho: g.rho(),
            spectral_gap: g.gap(),
            residual_norm: g.residual_norm,
            in_span_coeffs: g.coefficients,
            bounds,
        })
    }
}

/// One report per column of `x`.
pub fn bound_report(
    x: &Matrix,
    r: usize,
    inst: Option<&MixtureInstance>,
) -> Result<Vec<BoundReport>> {
    let ctx = ReportContext::new(x, r, inst)?;
    (0..x.cols()).map(|i| ctx.column(i)).collect()
}
