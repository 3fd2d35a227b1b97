use loocluster_core::linalg::{
    dot, operator_norm, project_split, projector_distance, projector_distance_explicit,
    projector_distance_spectral, singular_values, thin_svd, Matrix, SubspaceBasis,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{jacobi_singular_values, random_matrix};

fn orthonormality_defect(m: &Matrix) -> f64 {
    m.tr_matmul(m)
        .unwrap()
        .sub(&Matrix::identity(m.cols()))
        .unwrap()
        .frobenius_norm()
}

#[test]
fn five_by_seven_matches_jacobi() {
    let m = random_matrix(5, 7, 2024);
    let ours = thin_svd(&m, None).unwrap().singular_values;
    let reference = jacobi_singular_values(&m);
    assert_eq!(ours.len(), 5);
    for (a, b) in ours.iter().zip(&reference) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

#[test]
fn large_truncated_route_matches_jacobi() {
    // big enough for the Krylov route
    let mut m = random_matrix(100, 80, 5);
    for j in 0..80 {
        m[(0, j)] += 10.0;
    }
    let ours = thin_svd(&m, Some(3)).unwrap().singular_values;
    let reference = jacobi_singular_values(&m);
    for (a, b) in ours.iter().zip(&reference) {
        assert!((a - b).abs() <= 1e-9 * reference[0], "{a} vs {b}");
    }
}

#[test]
fn identity_and_rank_one() {
    assert_eq!(
        thin_svd(&Matrix::identity(3), None)
            .unwrap()
            .singular_values,
        vec![1.0; 3]
    );
    let m = Matrix::from_fn(4, 4, |_, _| 10.0 * 0.25);
    let svd = thin_svd(&m, None).unwrap();
    assert!((svd.singular_values[0] - 10.0).abs() < 1e-12);
    assert!(svd.singular_values[1..].iter().all(|&s| s < 1e-12));
    assert!(svd.left.column(0).iter().all(|&u| (u - 0.5).abs() < 1e-12));
}

#[test]
fn operator_norm_examples() {
    assert_eq!(operator_norm(&Matrix::zeros(3, 2)).unwrap(), 0.0);
    let d = Matrix::from_row_major(2, 2, &[3.0, 0.0, 0.0, 1.0]).unwrap();
    assert!((operator_norm(&d).unwrap() - 3.0).abs() < 1e-14);
    let m = random_matrix(6, 4, 9);
    let s1 = thin_svd(&m, None).unwrap().singular_values[0];
    assert!((operator_norm(&m).unwrap() - s1).abs() <= 1e-9);
}

#[test]
fn leave_one_out_examples() {
    let m = Matrix::from_row_major(1, 3, &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(m.leave_one_out(1).unwrap().as_slice(), &[1.0, 3.0]);
    assert_eq!(m.leave_one_out(2).unwrap().as_slice(), &[1.0, 2.0]);
    let two = Matrix::from_row_major(1, 2, &[4.0, 5.0]).unwrap();
    assert_eq!(two.leave_one_out(0).unwrap().as_slice(), &[5.0]);
    assert!(m.leave_one_out(3).is_err());
    assert!(Matrix::zeros(2, 1).leave_one_out(0).is_err());
}

#[test]
fn non_finite_input_is_rejected() {
    let mut m = Matrix::zeros(2, 2);
    m[(1, 0)] = f64::NAN;
    assert!(thin_svd(&m, None).is_err());
    assert!(operator_norm(&m).is_err());
}

fn matrix_strategy() -> impl Strategy<Value = Matrix> {
    (1usize..9, 1usize..9).prop_flat_map(|(p, n)| {
        proptest::collection::vec(-10.0f64..10.0, p * n)
            .prop_map(move |v| Matrix::from_col_major(p, n, v).unwrap())
    })
}

fn random_basis(p: usize, r: usize, rng: &mut ChaCha8Rng) -> SubspaceBasis {
    let m = Matrix::from_fn(p, r, |_, _| rng.random_range(-1.0..1.0));
    let svd = thin_svd(&m, None).unwrap();
    SubspaceBasis::new(svd.left.leading_columns(r)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn svd_invariants(m in matrix_strategy()) {
        let svd = thin_svd(&m, None).unwrap();
        let s = &svd.singular_values;
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]) && s.iter().all(|&x| x >= 0.0));
        prop_assert!(orthonormality_defect(&svd.left) <= 1e-10);
        prop_assert!(orthonormality_defect(&svd.right) <= 1e-10);
        let err = svd.reconstruct().sub(&m).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-8 * (1.0 + m.frobenius_norm()));
        for j in 0..svd.rank() {
            let u = svd.left.column(j);
            let (idx, _) = u.iter().enumerate().fold((0, 0.0f64), |b, (i, &x)| if x.abs() > b.1 { (i, x.abs()) } else { b });
            prop_assert!(u[idx] >= 0.0);
        }
    }

    #[test]
    fn singular_values_only_agree_with_full(m in matrix_strategy()) {
        let a = singular_values(&m).unwrap();
        let b = thin_svd(&m, None).unwrap().singular_values;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + b[0]));
        }
    }

    #[test]
    fn weyl_inequality(seed in any::<u64>(), p in 1usize..8, n in 1usize..8, scale in 0.0f64..2.0) {
        let m = random_matrix(p, n, seed);
        let d = random_matrix(p, n, seed ^ 0xabcdef).scale(scale);
        let s0 = singular_values(&m).unwrap();
        let s1 = singular_values(&m.add(&d).unwrap()).unwrap();
        let bound = operator_norm(&d).unwrap();
        for (a, b) in s0.iter().zip(&s1) {
            prop_assert!((a - b).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn projector_distance_triangle(seed in any::<u64>(), p in 2usize..9, r in 1usize..4) {
        let r = r.min(p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (random_basis(p, r, &mut rng), random_basis(p, r, &mut rng), random_basis(p, r, &mut rng));
        let ab = projector_distance(&a, &b).unwrap();
        let bc = projector_distance(&b, &c).unwrap();
        let ac = projector_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(ab <= (2.0 * r as f64).sqrt() + 1e-12);
        prop_assert_eq!(ab, projector_distance(&b, &a).unwrap());
    }

    #[test]
    fn project_split_invariants(seed in any::<u64>(), p in 1usize..9, r in 1usize..4) {
        let r = r.min(p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_basis(p, r, &mut rng);
        let y: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (inside, resid) = project_split(&u, &y).unwrap();
        for i in 0..p {
            prop_assert!((inside[i] + resid[i] - y[i]).abs() <= 1e-12);
        }
        let back = u.coefficients(&resid).unwrap();
        prop_assert!(back.iter().all(|c| c.abs() <= 1e-10));
    }
}

#[test]
fn distance_routes_agree_on_a_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for t in 0..1000 {
        let p = 2 + t % 12;
        let r = 1 + t % p.min(4);
        let a = random_basis(p, r, &mut rng);
        let b = random_basis(p, r, &mut rng);
        let d = projector_distance(&a, &b).unwrap();
        let s = projector_distance_spectral(&a, &b).unwrap();
        let e = projector_distance_explicit(&a, &b).unwrap();
        assert!((d - s).abs() <= 1e-8, "trial {t}: {d} vs spectral {s}");
        assert!((d - e).abs() <= 1e-12, "trial {t}: {d} vs explicit {e}");
    }
}

#[test]
fn nearby_subspaces_keep_relative_accuracy() {
    // the trace identity cancels catastrophically here; the explicit
    // projector difference does not
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for t in 0..200 {
        let p = 3 + t % 10;
        let r = 1 + t % 2;
        let a = random_basis(p, r, &mut rng);
        let eps = 10f64.powi(-((2 + t % 8) as i32));
        let perturbed = Matrix::from_fn(p, r, |i, j| {
            a.matrix()[(i, j)] + eps * rng.random_range(-1.0..1.0)
        });
        let b = SubspaceBasis::new(thin_svd(&perturbed, None).unwrap().left.leading_columns(r))
            .unwrap();
        let d = projector_distance(&a, &b).unwrap();
        let e = projector_distance_explicit(&a, &b).unwrap();
        assert!(
            (d - e).abs() <= 1e-6 * e + 1e-15,
            "trial {t}: {d} vs explicit {e}"
        );
    }
}

#[test]
fn basis_columns_stay_unit_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = random_basis(6, 3, &mut rng);
    for j in 0..3 {
        let c = b.matrix().column(j);
        assert!((dot(c, c) - 1.0).abs() < 1e-14);
    }
}
