//! Mixture-model instances `X = P + E` and the ground-truth diagnostics the
//! theory gates on.
//!
//! Randomness comes from ChaCha8 keyed by the spec seed. Stream 0 shuffles
//! the balanced assignment; stream `j + 1` generates noise column `j`, so an
//! instance is the same whatever order its columns are produced in.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{invalid, Result};
use crate::linalg::{
    norm2, numerical_rank, operator_norm, singular_values, squared_distance, Matrix,
};

/// Distribution of each noise coordinate in the coordinate-iid family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordinateDist {
    Gaussian {
        sigma: f64,
    },
    /// Density `exp(−|x|/b) / 2b`.
    Laplace {
        scale: f64,
    },
    /// `±a` with equal probability.
    Rademacher {
        scale: f64,
    },
    /// Uniform on `[−w, w]`.
    Uniform {
        half_width: f64,
    },
}

impl CoordinateDist {
    fn parameter(&self) -> f64 {
        match *self {
            CoordinateDist::Gaussian { sigma } => sigma,
            CoordinateDist::Laplace { scale } => scale,
            CoordinateDist::Rademacher { scale } => scale,
            CoordinateDist::Uniform { half_width } => half_width,
        }
    }

    /// Variance σ̄².
    pub fn variance(&self) -> f64 {
        let s = self.parameter();
        match self {
            CoordinateDist::Gaussian { .. } | CoordinateDist::Rademacher { .. } => s * s,
            CoordinateDist::Laplace { .. } => 2.0 * s * s,
            CoordinateDist::Uniform { .. } => s * s / 3.0,
        }
    }

    /// Sub-Gaussian variance proxy σ²; `None` for Laplace, which has none.
    pub fn variance_proxy(&self) -> Option<f64> {
        let s = self.parameter();
        match self {
            CoordinateDist::Gaussian { .. } | CoordinateDist::Rademacher { .. } => Some(s * s),
            CoordinateDist::Uniform { .. } => Some(s * s / 3.0),
            CoordinateDist::Laplace { .. } => None,
        }
    }

    /// Fisher information of the location family, where the density is smooth enough.
    pub fn fisher_information(&self) -> Option<f64> {
        let s = self.parameter();
        match self {
            CoordinateDist::Gaussian { .. } | CoordinateDist::Laplace { .. } => Some(1.0 / (s * s)),
            CoordinateDist::Rademacher { .. } | CoordinateDist::Uniform { .. } => None,
        }
    }

    /// `log f(x)` up to an additive constant, for families with a usable density.
    pub fn log_density(&self, x: f64) -> Option<f64> {
        match *self {
            CoordinateDist::Gaussian { sigma } => Some(-0.5 * (x / sigma) * (x / sigma)),
            CoordinateDist::Laplace { scale } => Some(-x.abs() / scale),
            CoordinateDist::Rademacher { .. } | CoordinateDist::Uniform { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CoordinateDist::Gaussian { .. } => "gaussian",
            CoordinateDist::Laplace { .. } => "laplace",
            CoordinateDist::Rademacher { .. } => "rademacher",
            CoordinateDist::Uniform { .. } => "uniform",
        }
    }

    pub fn scale(&self) -> f64 {
        self.parameter()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            CoordinateDist::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            CoordinateDist::Laplace { scale } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    scale * e
                } else {
                    -scale * e
                }
            }
            CoordinateDist::Rademacher { scale } => {
                if rng.random::<bool>() {
                    scale
                } else {
                    -scale
                }
            }
            CoordinateDist::Uniform { half_width } => {
                half_width * (2.0 * rng.random::<f64>() - 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// `E = 0` exactly.
    Zero,
    /// `ε_i ~ N(0, σ² I_p)`.
    IsotropicGaussian { sigma: f64 },
    /// Every entry of `E` iid from the given distribution.
    CoordinateIid(CoordinateDist),
}

impl NoiseSpec {
    fn coordinate(&self) -> Option<CoordinateDist> {
        match *self {
            NoiseSpec::Zero => None,
            NoiseSpec::IsotropicGaussian { sigma } => Some(CoordinateDist::Gaussian { sigma }),
            NoiseSpec::CoordinateIid(d) => Some(d),
        }
    }

    pub fn variance(&self) -> f64 {
        self.coordinate().map_or(0.0, |d| d.variance())
    }

    pub fn variance_proxy(&self) -> Option<f64> {
        self.coordinate().map_or(Some(0.0), |d| d.variance_proxy())
    }

    pub fn fisher_information(&self) -> Option<f64> {
        self.coordinate().and_then(|d| d.fisher_information())
    }

    /// The per-coordinate distribution, if any noise is present.
    pub fn distribution(&self) -> Option<CoordinateDist> {
        self.coordinate()
    }

    fn validate(&self) -> Result<()> {
        if let Some(d) = self.coordinate() {
            let s = d.parameter();
            if !s.is_finite() || s <= 0.0 {
                return Err(invalid!(
                    "noise scale must be positive and finite (got {}); use the zero-noise spec for E = 0",
                    s
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    /// 0-based labels, one per column.
    Explicit(Vec<usize>),
    /// Labels `i mod k`, shuffled: every cluster has ⌊n/k⌋ or ⌈n/k⌉ members.
    BalancedRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub n: usize,
    /// `p x k`; column `a` is the centre of cluster `a`.
    pub centers: Matrix,
    pub assignment: Assignment,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn p(&self) -> usize {
        self.centers.rows()
    }

    pub fn k(&self) -> usize {
        self.centers.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, k, n) = (self.p(), self.k(), self.n);
        if p == 0 || k == 0 || n == 0 {
            return Err(invalid!(
                "p, k and n must be positive (p={}, k={}, n={})",
                p,
                k,
                n
            ));
        }
        if k > n {
            return Err(invalid!(
                "more clusters than observations (k={}, n={})",
                k,
                n
            ));
        }
        if !self.centers.is_finite() {
            return Err(invalid!("centres have non-finite entries"));
        }
        for a in 0..k {
            for b in 0..a {
                if self.centers.column(a) == self.centers.column(b) {
                    return Err(invalid!("centres {} and {} coincide", b + 1, a + 1));
                }
            }
        }
        if let Assignment::Explicit(z) = &self.assignment {
            check_labels(z, k)?;
            if z.len() != n {
                return Err(invalid!("{} labels given for {} observations", z.len(), n));
            }
            let counts = cluster_sizes(z, k);
            if let Some(a) = counts.iter().position(|&c| c == 0) {
                return Err(invalid!("cluster {} has no members", a + 1));
            }
        }
        self.noise.validate()
    }
}

#[derive(Debug, Clone)]
pub struct MixtureInstance {
    pub x: Matrix,
    pub signal: Matrix,
    pub noise: Matrix,
    /// 0-based true labels.
    pub z_star: Vec<usize>,
    pub spec: MixtureSpec,
}

pub(crate) fn check_labels(z: &[usize], k: usize) -> Result<()> {
    if let Some(&bad) = z.iter().find(|&&a| a >= k) {
        return Err(invalid!("label {} outside 1..={}", bad + 1, k));
    }
    Ok(())
}

pub fn cluster_sizes(z: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &a in z {
        counts[a] += 1;
    }
    counts
}

/// Draws an instance; the result is a pure function of the spec.
pub fn make_instance(spec: &MixtureSpec) -> Result<MixtureInstance> {
    spec.validate()?;
    let (p, n, k) = (spec.p(), spec.n, spec.k());

    let z_star = match &spec.assignment {
        Assignment::Explicit(z) => z.clone(),
        Assignment::BalancedRandom => {
            let mut z: Vec<usize> = (0..n).map(|i| i % k).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            z.shuffle(&mut rng);
            z
        }
    };

    let mut signal = Matrix::zeros(p, n);
    for (j, &a) in z_star.iter().enumerate() {
        signal.column_mut(j).copy_from_slice(spec.centers.column(a));
    }

    let mut noise = Matrix::zeros(p, n);
    if let Some(dist) = spec.noise.distribution() {
        for j in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(j as u64 + 1);
            for e in noise.column_mut(j) {
                *e = dist.sample(&mut rng);
            }
        }
    }

    let x = signal.add(&noise)?;
    Ok(MixtureInstance {
        x,
        signal,
        noise,
        z_star,
        spec: spec.clone(),
    })
}

/// Symmetric two-cluster model: centres `±δ·1_p`, cluster 1 (label 0) at `+δ`.
pub fn two_cluster_spec(
    delta: f64,
    p: usize,
    n: usize,
    dist: CoordinateDist,
    seed: u64,
) -> Result<MixtureSpec> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(invalid!("δ must be nonzero and finite (got {})", delta));
    }
    let centers = Matrix::from_fn(p, 2, |_, a| if a == 0 { delta } else { -delta });
    Ok(MixtureSpec {
        n,
        centers,
        assignment: Assignment::BalancedRandom,
        noise: NoiseSpec::CoordinateIid(dist),
        seed,
    })
}

pub fn two_cluster_instance(
    delta: f64,
    p: usize,
    n: usize,
    dist: CoordinateDist,
    seed: u64,
) -> Result<MixtureInstance> {
    make_instance(&two_cluster_spec(delta, p, n, dist, seed)?)
}

impl MixtureInstance {
    pub fn p(&self) -> usize {
        self.x.rows()
    }

    pub fn n(&self) -> usize {
        self.x.cols()
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }

    /// `δ` when the centres are exactly `±δ·1_p` (in that order).
    pub fn two_cluster_delta(&self) -> Option<f64> {
        let c = &self.spec.centers;
        if c.cols() != 2 {
            return None;
        }
        let delta = c[(0, 0)];
        let symmetric =
            c.column(0).iter().all(|&v| v == delta) && c.column(1).iter().all(|&v| v == -delta);
        (symmetric && delta != 0.0).then_some(delta)
    }

    /// Singular values of `P`, from the `p x k` matrix `Θ·diag(√|cluster a|)`
    /// which has the same Gram matrix `PPᵀ`. Length `min(p, k)`.
    pub fn signal_singular_values(&self) -> Result<Vec<f64>> {
        let counts = cluster_sizes(&self.z_star, self.k());
        let c = &self.spec.centers;
        let weighted = Matrix::from_fn(c.rows(), c.cols(), |i, a| {
            c[(i, a)] * libm::sqrt(counts[a] as f64)
        });
        singular_values(&weighted)
    }
}

/// Minimum pairwise distance between distinct centres; `+∞` when `k = 1`.
pub fn min_center_separation(centers: &Matrix) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..centers.cols() {
        for b in 0..a {
            best = best.min(libm::sqrt(squared_distance(
                centers.column(a),
                centers.column(b),
            )));
        }
    }
    best
}

/// Ground-truth quantities for an instance. Ratios with a zero denominator
/// (no noise) are `+∞`; quantities needing a variance proxy are `None` when
/// the noise family has none.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticQuantities {
    pub delta: f64,
    pub beta: f64,
    pub kappa: usize,
    /// Singular values of `P`, length `min(p, k)`.
    pub lambda: Vec<f64>,
    pub e_opnorm: f64,
    pub variance_proxy: Option<f64>,
    pub fisher_information: Option<f64>,
    /// `λ_κ / ‖E‖`.
    pub rho0: f64,
    /// `Δ / (β^{-1/2} k n^{-1/2} ‖E‖)`.
    pub psi0: f64,
    /// `Δ / (β^{-1/2} k (1 + √(p/n)) σ)`.
    pub psi1: Option<f64>,
    /// `λ_κ / ((√n + √p) σ)`.
    pub rho1: Option<f64>,
    /// `Δ / (β^{-1/2} k² (1 + √(p/n)) σ)`.
    pub psi2: Option<f64>,
    /// `Δ / (β^{-1/2} (1 + √(p/n)) σ)`.
    pub psi3: Option<f64>,
    /// `Δ / (β^{-1/2} k² n^{-1/2} ‖E‖)`.
    pub tilde_psi0: f64,
    /// `T / (σ(√n + √p))`, when a threshold was supplied.
    pub rho2: Option<f64>,
    /// `T / ‖E‖`, when a threshold was supplied.
    pub tilde_rho: Option<f64>,
}

impl DiagnosticQuantities {
    /// `λ_j` (1-based), taken as 0 beyond the numerical rank κ.
    pub fn lambda_at(&self, j: usize) -> f64 {
        if j >= 1 && j <= self.kappa {
            self.lambda[j - 1]
        } else {
            0.0
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

pub fn diagnostics(inst: &MixtureInstance) -> Result<DiagnosticQuantities> {
    let (p, n, k) = (inst.p() as f64, inst.n() as f64, inst.k() as f64);
    let delta = min_center_separation(&inst.spec.centers);
    let counts = cluster_sizes(&inst.z_star, inst.k());
    let beta = k / n * counts.iter().copied().min().unwrap_or(0) as f64;
    let lambda = inst.signal_singular_values()?;
    let kappa = numerical_rank(&lambda);
    let lambda_kappa = if kappa > 0 { lambda[kappa - 1] } else { 0.0 };
    let e_opnorm = if inst.noise.as_slice().iter().all(|&v| v == 0.0) {
        0.0
    } else {
        operator_norm(&inst.noise)?
    };
    let sigma = inst.spec.noise.variance_proxy().map(libm::sqrt);
    let inv_sqrt_beta = 1.0 / libm::sqrt(beta);
    let dim_factor = 1.0 + libm::sqrt(p / n);

    Ok(DiagnosticQuantities {
        delta,
        beta,
        kappa,
        e_opnorm,
        variance_proxy: inst.spec.noise.variance_proxy(),
        fisher_information: inst.spec.noise.fisher_information(),
        rho0: ratio(lambda_kappa, e_opnorm),
        psi0: ratio(delta, inv_sqrt_beta * k / libm::sqrt(n) * e_opnorm),
        psi1: sigma.map(|s| ratio(delta, inv_sqrt_beta * k * dim_factor * s)),
        rho1: sigma.map(|s| ratio(lambda_kappa, (libm::sqrt(n) + libm::sqrt(p)) * s)),
        psi2: sigma.map(|s| ratio(delta, inv_sqrt_beta * k * k * dim_factor * s)),
        psi3: sigma.map(|s| ratio(delta, inv_sqrt_beta * dim_factor * s)),
        tilde_psi0: ratio(delta, inv_sqrt_beta * k * k / libm::sqrt(n) * e_opnorm),
        rho2: None,
        tilde_rho: None,
        lambda,
    })
}

/// [`diagnostics`] plus the threshold-dependent ratios `ρ₂` and `ρ̃`.
pub fn diagnostics_with_threshold(
    inst: &MixtureInstance,
    threshold: f64,
) -> Result<DiagnosticQuantities> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(invalid!(
            "threshold must be positive and finite (got {})",
            threshold
        ));
    }
    let mut d = diagnostics(inst)?;
    let (p, n) = (inst.p() as f64, inst.n() as f64);
    d.rho2 = d
        .variance_proxy
        .map(|v| ratio(threshold, libm::sqrt(v) * (libm::sqrt(n) + libm::sqrt(p))));
    d.tilde_rho = Some(ratio(threshold, d.e_opnorm));
    Ok(d)
}

/// `‖θ*_a‖` for each centre, handy for sizing experiments.
pub fn center_norms(centers: &Matrix) -> Vec<f64> {
    centers.columns().map(norm2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(sigma: f64) -> NoiseSpec {
        NoiseSpec::IsotropicGaussian { sigma }
    }

    fn spec(noise: NoiseSpec) -> MixtureSpec {
        MixtureSpec {
            n: 100,
            centers: Matrix::from_row_major(3, 2, &[1.0, -1.0, 2.0, 0.0, 0.0, 3.0]).unwrap(),
            assignment: Assignment::BalancedRandom,
            noise,
            seed: 11,
        }
    }

    #[test]
    fn noiseless_instance_is_pure_signal() {
        let inst = make_instance(&spec(NoiseSpec::Zero)).unwrap();
        assert_eq!(inst.x, inst.signal);
        let d = diagnostics(&inst).unwrap();
        assert_eq!(d.e_opnorm, 0.0);
        assert!(d.rho0.is_infinite() && d.psi0.is_infinite());
        assert_eq!(d.beta, 1.0);
    }

    #[test]
    fn reruns_are_identical() {
        let a = make_instance(&spec(gaussian(0.5))).unwrap();
        let b = make_instance(&spec(gaussian(0.5))).unwrap();
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        assert_eq!(a.z_star, b.z_star);
    }

    #[test]
    fn signal_plus_noise_is_exact() {
        let inst = make_instance(&spec(gaussian(2.0))).unwrap();
        for ((x, p), e) in inst
            .x
            .as_slice()
            .iter()
            .zip(inst.signal.as_slice())
            .zip(inst.noise.as_slice())
        {
            assert_eq!(*x, p + e);
        }
        for (j, &a) in inst.z_star.iter().enumerate() {
            assert_eq!(inst.signal.column(j), inst.spec.centers.column(a));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = spec(gaussian(0.0));
        assert!(make_instance(&s).is_err());
        s.noise = NoiseSpec::Zero;
        s.n = 1;
        assert!(make_instance(&s).is_err());
        s.n = 3;
        s.assignment = Assignment::Explicit(vec![0, 0, 0]);
        assert!(make_instance(&s).is_err());
        s.assignment = Assignment::Explicit(vec![0, 1, 2]);
        assert!(make_instance(&s).is_err());
        let mut s = spec(NoiseSpec::Zero);
        s.centers = Matrix::from_row_major(1, 2, &[1.0, 1.0]).unwrap();
        assert!(make_instance(&s).is_err());
    }

    #[test]
    fn two_cluster_geometry() {
        let inst =
            two_cluster_instance(1.0, 4, 10, CoordinateDist::Gaussian { sigma: 1.0 }, 3).unwrap();
        assert_eq!(inst.spec.centers.column(0), &[1.0; 4]);
        assert_eq!(inst.spec.centers.column(1), &[-1.0; 4]);
        assert_eq!(inst.two_cluster_delta(), Some(1.0));
        let d = diagnostics(&inst).unwrap();
        assert_eq!(d.delta, 4.0);
        assert_eq!(d.kappa, 1);
        assert!((d.lambda[0] - libm::sqrt(40.0)).abs() < 1e-12);
    }

    #[test]
    fn family_constants() {
        let l = CoordinateDist::Laplace { scale: 0.5 };
        assert_eq!(l.variance(), 0.5);
        assert_eq!(l.fisher_information(), Some(4.0));
        assert_eq!(l.variance_proxy(), None);
        let u = CoordinateDist::Uniform { half_width: 3.0 };
        assert_eq!(u.variance_proxy(), Some(3.0));
        assert_eq!(u.log_density(0.0), None);
        let r = CoordinateDist::Rademacher { scale: 2.0 };
        assert_eq!(r.variance_proxy(), Some(4.0));
    }

    #[test]
    fn laplace_diagnostics_flag_missing_proxy() {
        let inst =
            two_cluster_instance(0.3, 5, 20, CoordinateDist::Laplace { scale: 1.0 }, 1).unwrap();
        let d = diagnostics_with_threshold(&inst, 1.0).unwrap();
        assert!(d.psi1.is_none() && d.psi3.is_none() && d.rho2.is_none());
        assert!(d.tilde_rho.is_some());
    }
}
