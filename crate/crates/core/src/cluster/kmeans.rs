//! k-means on the columns of a matrix: k-means++ seeded Lloyd iterations
//! with restarts, an exhaustive oracle for tiny problems, and the exact
//! one-dimensional two-means split.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::linalg::{squared_distance, Matrix};

/// Largest `kⁿ` the exhaustive oracle accepts.
pub const ORACLE_CAP: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub enum KMeansInit {
    PlusPlus,
    /// Start from these `d x k` centres; a single run, restarts ignored.
    Given(Matrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop once the relative objective decrease falls to this level.
    pub convergence_tol: f64,
    pub init: KMeansInit,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 20,
            max_iterations: 300,
            convergence_tol: 1e-10,
            init: KMeansInit::PlusPlus,
            seed: 0,
        }
    }
}

impl KMeansOptions {
    pub fn with_seed(seed: u64) -> Self {
        KMeansOptions {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// 0-based labels.
    pub labels: Vec<usize>,
    /// `d x k` cluster means.
    pub centers: Matrix,
    pub objective: f64,
    /// Objective after every Lloyd step, one trace per restart.
    pub traces: Vec<Vec<f64>>,
}

/// Means of the labelled groups; an empty group keeps `fallback`'s column
/// (or zero).
pub fn cluster_means(
    points: &Matrix,
    labels: &[usize],
    k: usize,
    fallback: Option<&Matrix>,
) -> Matrix {
    let d = points.rows();
    let mut centers = Matrix::zeros(d, k);
    let mut counts = vec![0usize; k];
    for (j, &a) in labels.iter().enumerate() {
        counts[a] += 1;
        for (c, &x) in centers.column_mut(a).iter_mut().zip(points.column(j)) {
            *c += x;
        }
    }
    for a in 0..k {
        if counts[a] == 0 {
            if let Some(f) = fallback {
                centers.column_mut(a).copy_from_slice(f.column(a));
            }
        } else {
            let inv = 1.0 / counts[a] as f64;
            centers.column_mut(a).iter_mut().for_each(|c| *c *= inv);
        }
    }
    centers
}

/// `Σ_j ‖x_j − c_{label_j}‖²`.
pub fn kmeans_cost(points: &Matrix, labels: &[usize], centers: &Matrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(j, &a)| squared_distance(points.column(j), centers.column(a)))
        .sum()
}

/// The k-means objective of a labelling, with centres at the group means.
pub fn labelling_cost(points: &Matrix, labels: &[usize], k: usize) -> f64 {
    kmeans_cost(points, labels, &cluster_means(points, labels, k, None))
}

fn check(points: &Matrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(invalid!("k must be at least 1"));
    }
    if k > points.cols() {
        return Err(invalid!(
            "k = {} exceeds the number of points {}",
            k,
            points.cols()
        ));
    }
    if !points.is_finite() {
        return Err(invalid!("points have non-finite entries"));
    }
    Ok(())
}

/// Nearest centre, lowest index on ties.
fn nearest(x: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for a in 0..centers.cols() {
        let d = squared_distance(x, centers.column(a));
        if d < best.1 {
            best = (a, d);
        }
    }
    best
}

fn plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.cols();
    let mut centers = Matrix::zeros(points.rows(), k);
    let first = rng.random_range(0..n);
    centers.column_mut(0).copy_from_slice(points.column(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|j| squared_distance(points.column(j), points.column(first)))
        .collect();
    for a in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (j, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = j;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.column_mut(a).copy_from_slice(points.column(pick));
        for (j, w) in d2.iter_mut().enumerate() {
            *w = w.min(squared_distance(points.column(j), points.column(pick)));
        }
    }
    centers
}

/// One Lloyd run from the given centres.
fn lloyd(
    points: &Matrix,
    mut centers: Matrix,
    opts: &KMeansOptions,
) -> (Vec<usize>, Matrix, f64, Vec<f64>) {
    let n = points.cols();
    let k = centers.cols();
    let mut labels = vec![usize::MAX; n];
    let mut costs = vec![0.0; n];
    let mut trace = Vec::new();
    for _ in 0..opts.max_iterations {
        let mut changed = false;
        for j in 0..n {
            let (a, d) = nearest(points.column(j), &centers);
            changed |= labels[j] != a;
            labels[j] = a;
            costs[j] = d;
        }
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&a| counts[a] += 1);
        // reseed empty clusters with the currently worst-served point
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let (worst, &cost) =
                costs
                    .iter()
                    .enumerate()
                    .fold((0, &f64::NEG_INFINITY), |best, (j, c)| {
                        if *c > *best.1 {
                            (j, c)
                        } else {
                            best
                        }
                    });
            if cost <= 0.0 || counts[labels[worst]] <= 1 {
                break;
            }
            counts[labels[worst]] -= 1;
            counts[empty] = 1;
            labels[worst] = empty;
            costs[worst] = 0.0;
            centers
                .column_mut(empty)
                .copy_from_slice(points.column(worst));
            changed = true;
        }
        centers = cluster_means(points, &labels, k, Some(&centers));
        let objective = kmeans_cost(points, &labels, &centers);
        let previous = trace.last().copied();
        trace.push(objective);
        if !changed {
            break;
        }
        if let Some(prev) = previous {
            if prev - objective <= opts.convergence_tol * prev.max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    let objective = trace.last().copied().unwrap_or(0.0);
    (labels, centers, objective, trace)
}

/// Best of `opts.restarts` Lloyd runs (earliest run wins ties).
pub fn kmeans(points: &Matrix, k: usize, opts: &KMeansOptions) -> Result<KMeansResult> {
    check(points, k)?;
    if opts.restarts == 0 || opts.max_iterations == 0 {
        return Err(invalid!("restarts and max_iterations must be at least 1"));
    }
    let starts: Vec<Matrix> = match &opts.init {
        KMeansInit::Given(c) => {
            if c.shape() != (points.rows(), k) {
                return Err(invalid!(
                    "initial centres are {}x{}, expected {}x{}",
                    c.rows(),
                    c.cols(),
                    points.rows(),
                    k
                ));
            }
            vec![c.clone()]
        }
        KMeansInit::PlusPlus => (0..opts.restarts)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(s as u64);
                plus_plus(points, k, &mut rng)
            })
            .collect(),
    };
    let mut best: Option<KMeansResult> = None;
    let mut traces = Vec::with_capacity(starts.len());
    for start in starts {
        let (labels, centers, objective, trace) = lloyd(points, start, opts);
        traces.push(trace);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(KMeansResult {
                labels,
                centers,
                objective,
                traces: Vec::new(),
            });
        }
    }
    let mut best = best.expect("at least one run");
    best.traces = traces;
    Ok(best)
}

/// Global k-means optimum by enumerating every labelling with all `k`
/// groups occupied. Refuses problems with `kⁿ > 10⁷`.
pub fn exact_kmeans_oracle(points: &Matrix, k: usize) -> Result<KMeansResult> {
    check(points, k)?;
    let n = points.cols();
    if libm::pow(k as f64, n as f64) > ORACLE_CAP {
        return Err(invalid!(
            "exhaustive search over {}^{} labellings exceeds the cap",
            k,
            n
        ));
    }
    let d = points.rows();
    let mut search = Search {
        points,
        k,
        sums: vec![0.0; d * k],
        counts: vec![0; k],
        sq_total: points.as_slice().iter().map(|x| x * x).sum(),
        labels: vec![0; n],
        best_labels: vec![0; n],
        best: f64::INFINITY,
    };
    search.descend(0, 0);
    let labels = search.best_labels;
    let centers = cluster_means(points, &labels, k, None);
    let objective = kmeans_cost(points, &labels, &centers);
    Ok(KMeansResult {
        labels,
        centers,
        objective,
        traces: Vec::new(),
    })
}

struct Search<'a> {
    points: &'a Matrix,
    k: usize,
    sums: Vec<f64>,
    counts: Vec<usize>,
    sq_total: f64,
    labels: Vec<usize>,
    best_labels: Vec<usize>,
    best: f64,
}

impl Search<'_> {
    /// Labels are generated in canonical form (a new group opens only as
    /// the next unused index), which skips relabelled duplicates.
    fn descend(&mut self, j: usize, used: usize) {
        let n = self.points.cols();
        if n - j < self.k - used {
            return;
        }
        if j == n {
            let d = self.points.rows();
            let mut between = 0.0;
            for a in 0..self.k {
                let s = &self.sums[a * d..(a + 1) * d];
                between += s.iter().map(|x| x * x).sum::<f64>() / self.counts[a] as f64;
            }
            let cost = self.sq_total - between;
            if cost < self.best {
                self.best = cost;
                self.best_labels.copy_from_slice(&self.labels);
            }
            return;
        }
        let d = self.points.rows();
        let x = self.points.column(j);
        for a in 0..(used + 1).min(self.k) {
            self.labels[j] = a;
            self.counts[a] += 1;
            self.sums[a * d..(a + 1) * d]
                .iter_mut()
                .zip(x)
                .for_each(|(s, v)| *s += v);
            self.descend(j + 1, used.max(a + 1));
            self.sums[a * d..(a + 1) * d]
                .iter_mut()
                .zip(x)
                .for_each(|(s, v)| *s -= v);
            self.counts[a] -= 1;
        }
    }
}

/// Exact two-means of real values: the best split of the sorted values.
/// The group holding the largest value gets label 0.
pub fn two_means_1d(values: &[f64]) -> Result<(Vec<usize>, [f64; 2], f64)> {
    let n = values.len();
    if n < 2 {
        return Err(invalid!("two-means needs at least two values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("values must be finite"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&j| values[j]).collect();
    let shift = sorted[n / 2];
    let mut prefix = vec![(0.0, 0.0); n + 1];
    for (t, &v) in sorted.iter().enumerate() {
        let c = v - shift;
        prefix[t + 1] = (prefix[t].0 + c, prefix[t].1 + c * c);
    }
    let sse = |lo: usize, hi: usize| {
        let m = (hi - lo) as f64;
        let s = prefix[hi].0 - prefix[lo].0;
        let q = prefix[hi].1 - prefix[lo].1;
        (q - s * s / m).max(0.0)
    };
    let mut split = 1;
    let mut best = f64::INFINITY;
    for s in 1..n {
        let c = sse(0, s) + sse(s, n);
        if c < best {
            best = c;
            split = s;
        }
    }
    let mut labels = vec![0; n];
    for &j in &order[..split] {
        labels[j] = 1;
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let centers = [mean(&sorted[split..]), mean(&sorted[..split])];
    let objective: f64 = values
        .iter()
        .zip(&labels)
        .map(|(v, &a)| (v - centers[a]) * (v - centers[a]))
        .sum();
    Ok((labels, centers, objective))
}
