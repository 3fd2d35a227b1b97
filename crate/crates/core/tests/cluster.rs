use loocluster_core::cluster::{
    entrywise_diagnostics, exact_kmeans_oracle, kmeans, labelling_cost, lrt_cluster,
    misclustering_loss, misclustering_loss_exhaustive, rank_one_cluster, spectral_cluster,
    KMeansOptions, Solver,
};
use loocluster_core::linalg::{norm2, Matrix};
use loocluster_core::mixture::{
    diagnostics, make_instance, two_cluster_instance, Assignment, CoordinateDist, MixtureSpec,
    NoiseSpec,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(d: usize, n: usize, k: usize, spread: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    Matrix::from_fn(d, n, |i, j| {
        centers[j % k][i] + spread * rng.random_range(-1.0..1.0)
    })
}

fn labels_strategy() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>)> {
    (1usize..=6, 1usize..40).prop_flat_map(|(k, n)| {
        (
            Just(k),
            proptest::collection::vec(0..k, n),
            proptest::collection::vec(0..k, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn loss_properties((k, z, w) in labels_strategy(), seed in any::<u64>()) {
        let (l, perm) = misclustering_loss(&z, &w, k).unwrap();
        let (le, _) = misclustering_loss_exhaustive(&z, &w, k).unwrap();
        prop_assert_eq!(l, le);
        prop_assert!((0.0..=1.0).contains(&l));
        let mismatches = w.iter().zip(&z).filter(|(&b, &a)| perm[b] != a).count();
        prop_assert_eq!(mismatches as f64 / z.len() as f64, l);
        prop_assert_eq!(misclustering_loss(&z, &z, k).unwrap().0, 0.0);
        prop_assert_eq!(misclustering_loss(&w, &z, k).unwrap().0, l);
        let mut relabel: Vec<usize> = (0..k).collect();
        relabel.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let z2: Vec<usize> = z.iter().map(|&a| relabel[a]).collect();
        let w2: Vec<usize> = w.iter().map(|&a| relabel[(a + 1) % k]).collect();
        prop_assert_eq!(misclustering_loss(&z2, &w, k).unwrap().0, l);
        prop_assert_eq!(misclustering_loss(&z, &w2, k).unwrap().0, l);
    }

    #[test]
    fn lloyd_never_increases_the_objective(seed in any::<u64>(), k in 1usize..5, n in 5usize..40) {
        let pts = blobs(3, n, 4, 1.5, seed);
        let res = kmeans(&pts, k, &KMeansOptions::with_seed(seed)).unwrap();
        for trace in &res.traces {
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", trace);
            }
        }
        let best = res.traces.iter().filter_map(|t| t.last()).fold(f64::INFINITY, |a, &b| a.min(b));
        prop_assert_eq!(res.objective, best);
        prop_assert!((labelling_cost(&pts, &res.labels, k) - res.objective).abs() <= 1e-9 * (1.0 + res.objective));
    }
}

#[test]
fn heuristic_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut equal = 0;
    for t in 0..100 {
        let n = rng.random_range(3..=10);
        let k = rng.random_range(1..=3usize.min(n));
        let pts = blobs(2, n, rng.random_range(1..=4), rng.random_range(0.2..3.0), t);
        let exact = exact_kmeans_oracle(&pts, k).unwrap();
        let lloyd = kmeans(&pts, k, &KMeansOptions::with_seed(t)).unwrap();
        assert!(lloyd.objective >= exact.objective - 1e-9, "instance {t}");
        if (lloyd.objective - exact.objective).abs() <= 1e-9 {
            equal += 1;
        }
    }
    assert!(
        equal >= 95,
        "only {equal} of 100 instances reached the optimum"
    );
}

#[test]
fn oracle_on_nine_points() {
    let pts = blobs(2, 9, 3, 0.5, 9);
    let exact = exact_kmeans_oracle(&pts, 3).unwrap();
    // brute force over all 3⁹ labellings, written independently
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(9) {
        let labels: Vec<usize> = (0..9).map(|j| code / 3usize.pow(j as u32) % 3).collect();
        if (0..3).all(|a| labels.contains(&a)) {
            best = best.min(labelling_cost(&pts, &labels, 3));
        }
    }
    assert!((exact.objective - best).abs() <= 1e-12);
}

fn mixture(
    p: usize,
    n: usize,
    centers: Matrix,
    sigma: f64,
    seed: u64,
) -> loocluster_core::mixture::MixtureInstance {
    make_instance(&MixtureSpec {
        n,
        centers,
        assignment: Assignment::BalancedRandom,
        noise: if sigma == 0.0 {
            NoiseSpec::Zero
        } else {
            NoiseSpec::IsotropicGaussian { sigma }
        },
        seed,
    })
    .map(|inst| {
        assert_eq!(inst.p(), p);
        inst
    })
    .unwrap()
}

#[test]
fn noiseless_spectral_clustering_is_exact() {
    let centers =
        Matrix::from_row_major(3, 3, &[1.0, 4.0, 0.0, 0.0, 1.0, 5.0, 2.0, 0.0, 0.0]).unwrap();
    let inst = mixture(3, 30, centers, 0.0, 5);
    let res = spectral_cluster(&inst.x, 3, None, &Solver::default())
        .unwrap()
        .with_truth(&inst.z_star)
        .unwrap();
    assert_eq!(res.loss, Some(0.0));
    let ent = entrywise_diagnostics(&inst, &res, 3).unwrap();
    assert!(ent
        .iter()
        .all(|e| !e.misclustered && e.loo_noise_norm == 0.0 && e.full_noise_norm == 0.0));
}

#[test]
fn full_rank_projection_matches_raw_kmeans() {
    let pts = blobs(6, 6, 2, 0.3, 3);
    let opts = KMeansOptions::with_seed(17);
    let spectral = spectral_cluster(&pts, 2, Some(6), &Solver::Lloyd(opts.clone())).unwrap();
    let raw = kmeans(&pts, 2, &opts).unwrap();
    let (l, _) = misclustering_loss(&spectral.labels, &raw.labels, 2).unwrap();
    assert_eq!(l, 0.0);
    assert!((spectral.objective - raw.objective).abs() <= 1e-9);
}

#[test]
fn reduced_and_lifted_objectives_agree() {
    let centers = Matrix::from_fn(20, 3, |i, a| if i == a { 4.0 } else { 0.0 });
    let inst = mixture(20, 90, centers, 1.0, 6);
    for r in 1..=3 {
        let res = spectral_cluster(&inst.x, 3, Some(r), &Solver::default()).unwrap();
        let lifted_points = res
            .basis
            .matrix()
            .matmul(&res.basis.matrix().tr_matmul(&inst.x).unwrap())
            .unwrap();
        let lifted =
            loocluster_core::cluster::kmeans_cost(&lifted_points, &res.labels, &res.centers_lifted);
        assert!(
            (lifted - res.objective).abs() <= 1e-9 * (1.0 + res.objective),
            "r={r}"
        );
    }
}

/// `Δ/σ = 6`: mean loss over 200 draws against `2·exp(−Δ²/8σ²)`.
#[test]
fn gaussian_mixture_error_rate() {
    let (p, n, delta) = (50, 1000, 6.0);
    let centers = Matrix::from_fn(p, 2, |i, a| {
        if i == 0 {
            [delta / 2.0, -delta / 2.0][a]
        } else {
            0.0
        }
    });
    let mut total = 0.0;
    for t in 0..200 {
        let inst = mixture(p, n, centers.clone(), 1.0, 1000 + t);
        let res = spectral_cluster(
            &inst.x,
            2,
            Some(1),
            &Solver::Lloyd(KMeansOptions::with_seed(t)),
        )
        .unwrap()
        .with_truth(&inst.z_star)
        .unwrap();
        total += res.loss.unwrap();
    }
    let mean = total / 200.0;
    let rate = 2.0 * (-(delta * delta) / 8.0f64).exp();
    assert!(mean <= rate + 0.005, "mean loss {mean} vs {rate}");
}

#[test]
fn lrt_is_the_sign_of_the_sum_under_gaussian_noise() {
    for seed in 0..5 {
        let dist = CoordinateDist::Gaussian { sigma: 1.0 };
        let inst = two_cluster_instance(0.05, 100, 200, dist, seed).unwrap();
        let lrt = lrt_cluster(&inst.x, 0.05, dist).unwrap();
        let sign: Vec<usize> = inst
            .x
            .columns()
            .map(|c| usize::from(c.iter().sum::<f64>() < 0.0))
            .collect();
        assert_eq!(lrt, sign);
    }
}

#[test]
fn lrt_recovers_labels_with_tiny_noise() {
    for dist in [
        CoordinateDist::Gaussian { sigma: 1e-3 },
        CoordinateDist::Laplace { scale: 1e-3 },
    ] {
        let inst = two_cluster_instance(2.0, 10, 40, dist, 1).unwrap();
        assert_eq!(lrt_cluster(&inst.x, 2.0, dist).unwrap(), inst.z_star);
    }
}

#[test]
fn rank_one_on_noiseless_data() {
    let centers = Matrix::from_fn(8, 2, |_, a| [1.5, -1.5][a]);
    let inst = mixture(8, 20, centers, 0.0, 2);
    let res = rank_one_cluster(&inst.x).unwrap();
    assert!(!res.degenerate);
    assert_eq!(
        misclustering_loss(&res.result.labels, &inst.z_star, 2)
            .unwrap()
            .0,
        0.0
    );
    assert_eq!(
        misclustering_loss(&res.sign_labels, &res.result.labels, 2)
            .unwrap()
            .0,
        0.0
    );
}

/// Deterministic guarantee with the exact k-means optimum: the loss and the
/// centre error bounds with constant 128 whenever `ψ₀ ≥ 16`.
#[test]
fn polynomial_bound_with_exact_kmeans() {
    let mut checked = 0;
    for seed in 0..40 {
        let centers = Matrix::from_fn(4, 2, |i, a| if i == 0 { [-100.0, 100.0][a] } else { 0.0 });
        let inst = mixture(4, 16, centers, 1.0 + (seed % 4) as f64, seed);
        let d = diagnostics(&inst).unwrap();
        if d.psi0 < 16.0 {
            continue;
        }
        checked += 1;
        let (n, k) = (16.0, 2.0);
        let res = spectral_cluster(&inst.x, 2, Some(1), &Solver::Exact)
            .unwrap()
            .with_truth(&inst.z_star)
            .unwrap();
        let loss = res.loss.unwrap();
        assert!(loss <= 128.0 * k * d.e_opnorm * d.e_opnorm / (n * d.delta * d.delta));
        assert!(loss <= d.beta / (2.0 * k));
        let perm = res.matched_perm.clone().unwrap();
        let limit = 128.0 / d.beta.sqrt() * k / n.sqrt() * d.e_opnorm;
        for a in 0..2 {
            let diff: Vec<f64> = (0..4)
                .map(|i| res.centers_lifted[(i, perm[a])] - inst.spec.centers[(i, a)])
                .collect();
            assert!(norm2(&diff) <= limit);
        }
        for rec in entrywise_diagnostics(&inst, &res, 1).unwrap() {
            if rec.misclustered {
                assert!(2.0 * rec.full_noise_norm >= rec.threshold_simple);
            }
        }
    }
    assert!(checked >= 10);
}

/// The leave-one-out projection is independent of `ε_i`, so its squared
/// norm averages `rσ²`; the full-data projection is biased upward.
#[test]
fn leave_one_out_noise_is_unbiased() {
    let (p, n, sigma) = (60, 120, 1.0);
    let centers = Matrix::from_fn(p, 2, |i, a| if i == 0 { [-6.0, 6.0][a] } else { 0.0 });
    let mut loo_sq = 0.0;
    let mut full_sq = 0.0;
    let mut count = 0.0;
    for seed in 0..10 {
        let inst = mixture(p, n, centers.clone(), sigma, seed);
        let res = spectral_cluster(&inst.x, 2, Some(1), &Solver::default())
            .unwrap()
            .with_truth(&inst.z_star)
            .unwrap();
        for rec in entrywise_diagnostics(&inst, &res, 1).unwrap() {
            loo_sq += rec.loo_noise_norm * rec.loo_noise_norm;
            full_sq += rec.full_noise_norm * rec.full_noise_norm;
            count += 1.0;
        }
    }
    let (loo, full) = (loo_sq / count, full_sq / count);
    // 1200 χ²₁ draws: standard error √(2/1200) ≈ 0.04
    assert!((loo - sigma * sigma).abs() < 0.15, "loo mean square {loo}");
    assert!(full > loo, "full {full} vs loo {loo}");
}

#[test]
fn signed_statistic_only_for_the_symmetric_model() {
    let dist = CoordinateDist::Gaussian { sigma: 1.0 };
    let inst = two_cluster_instance(0.5, 30, 60, dist, 3).unwrap();
    let res = rank_one_cluster(&inst.x)
        .unwrap()
        .result
        .with_truth(&inst.z_star)
        .unwrap();
    let recs = entrywise_diagnostics(&inst, &res, 1).unwrap();
    assert!(recs.iter().all(|r| r.signed_stat.is_some()));
    let centers = Matrix::from_fn(30, 2, |i, a| if i == 0 { [-3.0, 3.0][a] } else { 0.0 });
    let other = mixture(30, 60, centers, 1.0, 3);
    let res = spectral_cluster(&other.x, 2, Some(1), &Solver::default())
        .unwrap()
        .with_truth(&other.z_star)
        .unwrap();
    assert!(entrywise_diagnostics(&other, &res, 1)
        .unwrap()
        .iter()
        .all(|r| r.signed_stat.is_none()));
}
