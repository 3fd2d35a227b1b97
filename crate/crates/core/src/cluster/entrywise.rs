//! Per-observation diagnostics linking each clustering decision to the
//! noise projected on the full and leave-one-out singular subspaces.

use alloc::vec::Vec;

use super::spectral::ClusteringResult;
use crate::error::{invalid, Result};
use crate::linalg::{dot, thin_svd};
use crate::mixture::{diagnostics, MixtureInstance};

/// The explicit constant of the entrywise implication, `4 · 128`.
pub const ENTRYWISE_CONSTANT: f64 = 512.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EntrywiseRecord {
    /// 0-based.
    pub i: usize,
    /// `ẑ_i ≠ φ(z*_i)`.
    pub misclustered: bool,
    /// `‖Û_{−i,1:r}ᵀ ε_i‖`.
    pub loo_noise_norm: f64,
    /// `‖Û_{1:r}ᵀ ε_i‖`.
    pub full_noise_norm: f64,
    /// `(1 − 512/ψ₀) Δ`.
    pub threshold_simple: f64,
    /// `−2 (û_{1,−i}ᵀ ε_i) · sign(u₁ᵀ θ*_{z*_i})`, with `û_{1,−i}` signed to
    /// agree with `u₁ = 1_p/√p`. Only for the symmetric two-cluster model.
    pub signed_stat: Option<f64>,
}

/// Shared state for computing records one observation at a time.
#[derive(Debug)]
pub struct EntrywiseContext<'a> {
    inst: &'a MixtureInstance,
    result: &'a ClusteringResult,
    perm: &'a [usize],
    r: usize,
    threshold: f64,
    center_sign: Option<[f64; 2]>,
}

impl<'a> EntrywiseContext<'a> {
    pub fn new(inst: &'a MixtureInstance, result: &'a ClusteringResult, r: usize) -> Result<Self> {
        let perm = result.matched_perm.as_deref().ok_or_else(|| {
            invalid!("the clustering result has not been matched against the truth")
        })?;
        if result.labels.len() != inst.n() || perm.len() != inst.k() {
            return Err(invalid!("clustering result does not fit the instance"));
        }
        if r == 0 || r != result.basis.rank() {
            return Err(invalid!(
                "rank {} differs from the rank {} used for clustering",
                r,
                result.basis.rank()
            ));
        }
        if r > inst.p().min(inst.n() - 1) {
            return Err(invalid!("rank {} too large for leave-one-out subspaces", r));
        }
        let d = diagnostics(inst)?;
        let center_sign = inst.two_cluster_delta().map(|delta| {
            let s = if delta > 0.0 { 1.0 } else { -1.0 };
            [s, -s]
        });
        Ok(EntrywiseContext {
            inst,
            result,
            perm,
            r,
            threshold: (1.0 - ENTRYWISE_CONSTANT / d.psi0) * d.delta,
            center_sign,
        })
    }

    pub fn len(&self) -> usize {
        self.inst.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn record(&self, i: usize) -> Result<EntrywiseRecord> {
        let eps = self.inst.noise.column(i);
        let y = self.inst.x.leave_one_out(i)?;
        let svd = thin_svd(&y, Some(self.r))?;
        let loo = svd.leading_basis(self.r)?;
        let signed_stat = self.center_sign.map(|signs| {
            let u = svd.left.column(0);
            // ⟨û, 1_p⟩ ≥ 0
            let align = if u.iter().sum::<f64>() >= 0.0 {
                1.0
            } else {
                -1.0
            };
            -2.0 * align * dot(u, eps) * signs[self.inst.z_star[i]]
        });
        Ok(EntrywiseRecord {
            i,
            misclustered: self.result.labels[i] != self.perm[self.inst.z_star[i]],
            loo_noise_norm: loo.projected_norm(eps)?,
            full_noise_norm: self.result.basis.projected_norm(eps)?,
            threshold_simple: self.threshold,
            signed_stat,
        })
    }
}

pub fn entrywise_diagnostics(
    inst: &MixtureInstance,
    result: &ClusteringResult,
    r: usize,
) -> Result<Vec<EntrywiseRecord>> {
    let ctx = EntrywiseContext::new(inst, result, r)?;
    (0..ctx.len()).map(|i| ctx.record(i)).collect()
}
