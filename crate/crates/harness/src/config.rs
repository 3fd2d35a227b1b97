//! TOML configuration for single instances (`gen`) and experiments (`mc`).

use std::fmt;
use std::path::{Path, PathBuf};

use loocluster_core::linalg::Matrix;
use loocluster_core::mixture::{Assignment, CoordinateDist, MixtureSpec, NoiseSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "LOOCLUSTER_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Laplace,
    Rademacher,
    Uniform,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Laplace => "laplace",
            Family::Rademacher => "rademacher",
            Family::Uniform => "uniform",
        }
    }

    /// The coordinate distribution with standard deviation `sd`.
    pub fn with_sd(self, sd: f64) -> CoordinateDist {
        match self {
            Family::Gaussian => CoordinateDist::Gaussian { sigma: sd },
            Family::Laplace => CoordinateDist::Laplace {
                scale: sd / std::f64::consts::SQRT_2,
            },
            Family::Rademacher => CoordinateDist::Rademacher { scale: sd },
            Family::Uniform => CoordinateDist::Uniform {
                half_width: sd * 3f64.sqrt(),
            },
        }
    }

    /// The coordinate distribution with its native scale parameter.
    pub fn with_scale(self, scale: f64) -> CoordinateDist {
        match self {
            Family::Gaussian => CoordinateDist::Gaussian { sigma: scale },
            Family::Laplace => CoordinateDist::Laplace { scale },
            Family::Rademacher => CoordinateDist::Rademacher { scale },
            Family::Uniform => CoordinateDist::Uniform { half_width: scale },
        }
    }

    /// Isotropic Gaussian for the Gaussian family, iid coordinates otherwise;
    /// zero noise when `sd == 0`.
    pub fn noise(self, sd: f64) -> NoiseSpec {
        if sd == 0.0 {
            NoiseSpec::Zero
        } else if self == Family::Gaussian {
            NoiseSpec::IsotropicGaussian { sigma: sd }
        } else {
            NoiseSpec::CoordinateIid(self.with_sd(sd))
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Centres at pairwise distance `delta`: `±(Δ/2)e₁` for two clusters,
/// `(Δ/√2)e_a` for more.
pub fn default_centers(p: usize, k: usize, delta: f64) -> Result<Matrix> {
    if k < 2 {
        return Err(HarnessError::Config(
            "at least two clusters are needed to place centres".into(),
        ));
    }
    if k > 2 && p < k {
        return Err(HarnessError::Config(format!(
            "{k} orthogonal centres need p >= k, got p = {p}"
        )));
    }
    Ok(if k == 2 {
        Matrix::from_fn(p, 2, |i, a| {
            if i == 0 {
                [delta, -delta][a] / 2.0
            } else {
                0.0
            }
        })
    } else {
        Matrix::from_fn(p, k, |i, a| {
            if i == a {
                delta / std::f64::consts::SQRT_2
            } else {
                0.0
            }
        })
    })
}

/// Centres given as a list of points, one per cluster.
pub fn centers_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    if rows.is_empty() {
        return Err(HarnessError::Config("`centers` is empty".into()));
    }
    let p = rows[0].len();
    if p == 0 || rows.iter().any(|c| c.len() != p) {
        return Err(HarnessError::Config(
            "every centre needs the same positive dimension".into(),
        ));
    }
    Ok(Matrix::from_columns(rows)?)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub family: Option<Family>,
    /// Standard deviation of each coordinate.
    pub sigma: Option<f64>,
    /// Native parameter of the family (Laplace `b`, uniform half-width, ...).
    pub scale: Option<f64>,
}

impl NoiseConfig {
    pub fn spec(&self) -> Result<NoiseSpec> {
        let family = self.family.unwrap_or(Family::Gaussian);
        match (self.sigma, self.scale) {
            (Some(_), Some(_)) => Err(HarnessError::Config(
                "give either noise.sigma or noise.scale, not both".into(),
            )),
            (Some(sd), None) => Ok(family.noise(sd)),
            (None, Some(0.0)) => Ok(NoiseSpec::Zero),
            (None, Some(s)) => Ok(NoiseSpec::CoordinateIid(family.with_scale(s))),
            (None, None) => Err(HarnessError::Config(
                "noise.sigma or noise.scale is required".into(),
            )),
        }
    }
}

/// One mixture instance.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub p: Option<usize>,
    pub n: usize,
    pub k: Option<usize>,
    /// Centre separation for the default geometry; ignored when `centers` is set.
    pub delta: Option<f64>,
    pub seed: u64,
    pub noise: NoiseConfig,
    /// 1-based labels; balanced random when absent.
    pub assignment: Option<Vec<usize>>,
    /// One row per centre.
    pub centers: Option<Vec<Vec<f64>>>,
}

impl InstanceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn spec(&self) -> Result<MixtureSpec> {
        let centers = match (&self.centers, self.delta) {
            (Some(rows), _) => {
                let c = centers_from_rows(rows)?;
                if self.p.is_some_and(|p| p != c.rows()) || self.k.is_some_and(|k| k != c.cols()) {
                    return Err(HarnessError::Config(
                        "p or k disagrees with `centers`".into(),
                    ));
                }
                c
            }
            (None, Some(delta)) => {
                let (p, k) = self.p.zip(self.k).ok_or_else(|| {
                    HarnessError::Config("p and k are required without `centers`".into())
                })?;
                default_centers(p, k, delta)?
            }
            (None, None) => {
                return Err(HarnessError::Config(
                    "either `delta` or `centers` is required".into(),
                ))
            }
        };
        let assignment = match &self.assignment {
            Some(z) => {
                if z.contains(&0) {
                    return Err(HarnessError::Config("assignment labels are 1-based".into()));
                }
                Assignment::Explicit(z.iter().map(|a| a - 1).collect())
            }
            None => Assignment::BalancedRandom,
        };
        let spec = MixtureSpec {
            n: self.n,
            centers,
            assignment,
            noise: self.noise.spec()?,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Every perturbation bound against the actual leave-one-out distance.
    Bounds,
    /// Rank-`r` spectral clustering under isotropic Gaussian noise.
    RateGmm,
    /// Rank-`r` spectral clustering under other noise families.
    RateSubg,
    /// Fixed rank `κ` against the gap-thresholded rank.
    Adaptive,
    /// Rank-one spectral clustering against the likelihood ratio test in the
    /// symmetric two-cluster model.
    Suboptimality,
    /// Per-observation check of the misclustering implication.
    Entrywise,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::RateGmm => "rate_gmm",
            ExperimentKind::RateSubg => "rate_subg",
            ExperimentKind::Adaptive => "adaptive",
            ExperimentKind::Suboptimality => "suboptimality",
            ExperimentKind::Entrywise => "entrywise",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_k() -> Vec<usize> {
    vec![2]
}

fn default_family() -> Vec<Family> {
    vec![Family::Gaussian]
}

/// Swept parameters; cells are the Cartesian product.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Noise standard deviation.
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub p: Vec<usize>,
    pub n: Vec<usize>,
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    #[serde(default = "default_family")]
    pub family: Vec<Family>,
    /// Adaptive threshold `T` as a multiple of the realised `‖E‖`.
    #[serde(default)]
    pub threshold_factor: Vec<f64>,
    /// Projection rank; defaults to `k` (or `κ` for the adaptive comparison).
    #[serde(default)]
    pub r: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub grid: Grid,
    pub trials_per_cell: usize,
    pub master_seed: u64,
    pub workers: Option<usize>,
    pub output: PathBuf,
    /// Fixed centre geometry (one row per centre) replacing `delta`, `p` and `k`.
    pub centers: Option<Vec<Vec<f64>>>,
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub experiment: ExperimentKind,
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub sigma: f64,
    pub threshold_factor: Option<f64>,
    pub r: Option<usize>,
    pub centers: Option<Matrix>,
}

impl Cell {
    /// Stable identifier; also the seed salt.
    pub fn id(&self) -> String {
        let mut id = format!(
            "{}/{}/p={}/n={}/k={}/delta={}/sigma={}",
            self.experiment, self.family, self.p, self.n, self.k, self.delta, self.sigma
        );
        if let Some(t) = self.threshold_factor {
            id.push_str(&format!("/T={t}"));
        }
        if let Some(r) = self.r {
            id.push_str(&format!("/r={r}"));
        }
        id
    }

    pub fn centers(&self) -> Result<Matrix> {
        match &self.centers {
            Some(c) => Ok(c.clone()),
            None => default_centers(self.p, self.k, self.delta),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    /// Worker count from the config, then the environment, then 1.
    pub fn resolved_workers(&self) -> Result<usize> {
        if let Some(w) = self.workers {
            return Ok(w);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                HarnessError::Config(format!(
                    "{WORKERS_ENV} must be a positive integer, got `{v}`"
                ))
            }),
            Err(_) => Ok(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials_per_cell == 0 {
            return Err(HarnessError::Config(
                "trials_per_cell must be at least 1".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        let g = &self.grid;
        if g.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(HarnessError::Config(
                "sigma values must be finite and non-negative".into(),
            ));
        }
        if g.delta.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(HarnessError::Config("delta values must be positive".into()));
        }
        if g.threshold_factor
            .iter()
            .any(|t| !(t.is_finite() && *t > 0.0))
        {
            return Err(HarnessError::Config(
                "threshold_factor values must be positive".into(),
            ));
        }
        if self.centers.is_some() && !(g.delta.is_empty() && g.p.is_empty()) {
            return Err(HarnessError::Config(
                "`centers` replaces grid.delta and grid.p; drop them".into(),
            ));
        }
        if self.experiment == ExperimentKind::Adaptive && g.threshold_factor.is_empty() {
            return Err(HarnessError::Config(
                "the adaptive experiment needs grid.threshold_factor".into(),
            ));
        }
        if self.experiment == ExperimentKind::Suboptimality {
            if self.centers.is_some() || g.k != [2] {
                return Err(HarnessError::Config(
                    "the symmetric two-cluster model fixes k = 2 and its centres".into(),
                ));
            }
            if g.sigma.contains(&0.0) {
                return Err(HarnessError::Config(
                    "the likelihood ratio test needs positive noise".into(),
                ));
            }
        }
        if self.cells()?.is_empty() {
            return Err(HarnessError::Config("the grid is empty".into()));
        }
        Ok(())
    }

    /// The grid in a fixed nesting order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let g = &self.grid;
        let fixed = self.centers.as_deref().map(centers_from_rows).transpose()?;
        let (ps, ks, deltas) = match &fixed {
            Some(c) => (
                vec![c.rows()],
                vec![c.cols()],
                vec![loocluster_core::mixture::min_center_separation(c)],
            ),
            None => (g.p.clone(), g.k.clone(), g.delta.clone()),
        };
        let thresholds: Vec<Option<f64>> = if g.threshold_factor.is_empty() {
            vec![None]
        } else {
            g.threshold_factor.iter().copied().map(Some).collect()
        };
        let ranks: Vec<Option<usize>> = if g.r.is_empty() {
            vec![None]
        } else {
            g.r.iter().copied().map(Some).collect()
        };
        let mut cells = Vec::new();
        for &family in &g.family {
            for &p in &ps {
                for &n in &g.n {
                    for &k in &ks {
                        for &delta in &deltas {
                            for &sigma in &g.sigma {
                                for &threshold_factor in &thresholds {
                                    for &r in &ranks {
                                        cells.push(Cell {
                                            experiment: self.experiment,
                                            family,
                                            p,
                                            n,
                                            k,
                                            delta,
                                            sigma,
                                            threshold_factor,
                                            r,
                                            centers: fixed.clone(),
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}
