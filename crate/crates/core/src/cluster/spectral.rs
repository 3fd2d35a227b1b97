//! Spectral clustering: project the columns onto the leading left singular
//! vectors, then run k-means in the reduced space.

use alloc::vec::Vec;

use super::kmeans::{exact_kmeans_oracle, kmeans, two_means_1d, KMeansOptions, KMeansResult};
use super::loss::misclustering_loss;
use crate::error::{invalid, Error, Result};
use crate::linalg::{thin_svd, Matrix, SubspaceBasis, Svd};
use crate::mixture::CoordinateDist;

/// How the reduced-space k-means problem is solved.
#[derive(Debug, Clone, PartialEq)]
pub enum Solver {
    Lloyd(KMeansOptions),
    /// Exhaustive enumeration (tiny problems only).
    Exact,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Lloyd(KMeansOptions::default())
    }
}

impl From<KMeansOptions> for Solver {
    fn from(opts: KMeansOptions) -> Self {
        Solver::Lloyd(opts)
    }
}

impl Solver {
    fn solve(&self, points: &Matrix, k: usize) -> Result<KMeansResult> {
        match self {
            Solver::Lloyd(opts) => kmeans(points, k, opts),
            Solver::Exact => exact_kmeans_oracle(points, k),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringResult {
    /// 0-based labels.
    pub labels: Vec<usize>,
    /// `r x k` centres `ĉ_a` of the reduced problem.
    pub centers_reduced: Matrix,
    /// `p x k` centres `θ̂_a = Û ĉ_a`.
    pub centers_lifted: Matrix,
    pub objective: f64,
    pub r_used: usize,
    /// `Û₁:ᵣ`.
    pub basis: SubspaceBasis,
    /// Leading singular values of `X` computed along the way.
    pub singular_values: Vec<f64>,
    /// `φ[b]`: estimated label matched to true label `b`, once compared with a truth.
    pub matched_perm: Option<Vec<usize>>,
    pub loss: Option<f64>,
}

impl ClusteringResult {
    pub fn k(&self) -> usize {
        self.centers_reduced.cols()
    }

    /// Fills `loss` and `matched_perm` against the true labels.
    pub fn with_truth(mut self, z_star: &[usize]) -> Result<Self> {
        let (loss, perm) = misclustering_loss(&self.labels, z_star, self.k())?;
        self.loss = Some(loss);
        self.matched_perm = Some(perm);
        Ok(self)
    }
}

fn check_rank(x: &Matrix, k: usize, r: usize) -> Result<()> {
    let d = x.rows().min(x.cols());
    if k == 0 {
        return Err(invalid!("k must be at least 1"));
    }
    if r == 0 || r > d {
        return Err(invalid!("rank {} outside 1..=min(p, n) = {}", r, d));
    }
    Ok(())
}

fn cluster_in_span(
    x: &Matrix,
    svd: &Svd,
    k: usize,
    r: usize,
    solver: &Solver,
) -> Result<ClusteringResult> {
    let basis = svd.leading_basis(r)?;
    let reduced = basis.matrix().tr_matmul(x)?;
    let km = solver.solve(&reduced, k)?;
    let centers_lifted = basis.matrix().matmul(&km.centers)?;
    Ok(ClusteringResult {
        labels: km.labels,
        centers_lifted,
        centers_reduced: km.centers,
        objective: km.objective,
        r_used: r,
        basis,
        singular_values: svd.singular_values.clone(),
        matched_perm: None,
        loss: None,
    })
}

/// Rank-`r` spectral clustering into `k` groups; `r` defaults to `k`.
pub fn spectral_cluster(
    x: &Matrix,
    k: usize,
    r: Option<usize>,
    solver: &Solver,
) -> Result<ClusteringResult> {
    let r = r.unwrap_or(k);
    check_rank(x, k, r)?;
    let svd = thin_svd(x, Some(r))?;
    cluster_in_span(x, &svd, k, r, solver)
}

/// `max{a ∈ 1..=k : σ_a − σ_{a+1} ≥ T}` with `σ_j = 0` past `min(p, n)`.
///
/// `singular_values` must hold at least `min(k + 1, min_dim)` leading values.
pub fn threshold_rank(
    singular_values: &[f64],
    min_dim: usize,
    k: usize,
    threshold: f64,
) -> Result<usize> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(invalid!(
            "threshold must be positive and finite (got {})",
            threshold
        ));
    }
    let sigma = |j: usize| -> Result<f64> {
        if j > min_dim {
            Ok(0.0)
        } else {
            singular_values
                .get(j - 1)
                .copied()
                .ok_or_else(|| invalid!("σ_{} is needed but was not computed", j))
        }
    };
    for a in (1..=k.min(min_dim)).rev() {
        if sigma(a)? - sigma(a + 1)? >= threshold {
            return Ok(a);
        }
    }
    Err(Error::NoGapFound { threshold })
}

/// Spectral clustering with the rank chosen by the largest index whose
/// singular value gap reaches `threshold`.
pub fn adaptive_spectral_cluster(
    x: &Matrix,
    k: usize,
    threshold: f64,
    solver: &Solver,
) -> Result<ClusteringResult> {
    check_rank(x, k, 1)?;
    let d = x.rows().min(x.cols());
    let svd = thin_svd(x, Some((k + 1).min(d)))?;
    let r = threshold_rank(&svd.singular_values, d, k, threshold)?;
    cluster_in_span(x, &svd, k, r, solver)
}

#[derive(Debug, Clone)]
pub struct RankOneResult {
    /// Exact two-means on `û₁ᵀX`.
    pub result: ClusteringResult,
    /// Label 0 where `v̂₁ᵢ ≥ 0`, else 1.
    pub sign_labels: Vec<usize>,
    /// The signs put every column in one group.
    pub degenerate: bool,
}

/// Two-cluster estimator from the first singular vector only.
pub fn rank_one_cluster(x: &Matrix) -> Result<RankOneResult> {
    if x.cols() < 2 {
        return Err(invalid!("need at least two columns"));
    }
    let svd = thin_svd(x, Some(1))?;
    let basis = svd.leading_basis(1)?;
    let scores = basis.matrix().tr_matmul(x)?;
    let (labels, c, objective) = two_means_1d(scores.as_slice())?;
    let centers_reduced = Matrix::from_col_major(1, 2, c.to_vec())?;
    let sign_labels: Vec<usize> = svd
        .right
        .column(0)
        .iter()
        .map(|&v| usize::from(v < 0.0))
        .collect();
    let degenerate = sign_labels.iter().all(|&a| a == sign_labels[0]);
    Ok(RankOneResult {
        result: ClusteringResult {
            labels,
            centers_lifted: basis.matrix().matmul(&centers_reduced)?,
            centers_reduced,
            objective,
            r_used: 1,
            basis,
            singular_values: svd.singular_values.clone(),
            matched_perm: None,
            loss: None,
        },
        sign_labels,
        degenerate,
    })
}

/// Likelihood ratio test between centres `+δ·1_p` (label 0) and `−δ·1_p`
/// (label 1) with known coordinate density: label 0 iff
/// `Σ log f(x_j − δ) ≥ Σ log f(x_j + δ)`.
pub fn lrt_cluster(x: &Matrix, delta: f64, dist: CoordinateDist) -> Result<Vec<usize>> {
    if dist.log_density(0.0).is_none() {
        return Err(invalid!(
            "the {} family has no density for the likelihood ratio",
            dist.name()
        ));
    }
    if !delta.is_finite() {
        return Err(invalid!("δ must be finite"));
    }
    let f = |v: f64| dist.log_density(v).expect("checked above");
    Ok(x.columns()
        .map(|col| {
            let l1: f64 = col.iter().map(|&v| f(v - delta)).sum();
            let l2: f64 = col.iter().map(|&v| f(v + delta)).sum();
            usize::from(l1 < l2)
        })
        .collect())
}
