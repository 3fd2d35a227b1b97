//! Golub-Kahan-Lanczos bidiagonalisation for a few leading singular triplets.
//!
//! Full reorthogonalisation (classical Gram-Schmidt, applied twice) keeps
//! both Krylov bases orthonormal to working precision. The projected
//! bidiagonal is decomposed with the dense routine after every few steps and
//! the iteration stops once every requested Ritz triplet has a residual below
//! `RESIDUAL_TOL * σ₁`. Anything unusual (breakdown, no convergence before
//! the Krylov space is exhausted) returns `None` so the caller can use the
//! dense route.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{axpy, dot, norm2, Matrix};
use super::svd::{canonicalize, dense_svd, sort_descending, Svd};
use crate::error::Result;

const MIN_DIM: usize = 64;
const RESIDUAL_TOL: f64 = 1e-13;
const START_SEED: u64 = 0x5eed_1a2c_0b5e_55ed;

pub(crate) fn worthwhile(min_dim: usize, rank: usize) -> bool {
    min_dim >= MIN_DIM && 6 * rank <= min_dim
}

/// Leading `r` singular triplets of `a`, or `None` if the iteration should
/// be abandoned in favour of a dense decomposition.
pub(crate) fn truncated_svd(a: &Matrix, r: usize) -> Result<Option<Svd>> {
    let (p, n) = a.shape();
    let d = p.min(n);
    if r == 0 {
        return Ok(Some(Svd {
            left: Matrix::zeros(p, 0),
            singular_values: Vec::new(),
            right: Matrix::zeros(n, 0),
            min_dim: d,
        }));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; p];
    let min_steps = (2 * r + 8).min(d);

    for j in 0..d {
        a.mul_vec_into(&vs[j], &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &us[j - 1], &mut w);
        }
        reorthogonalize(&mut w, &us);
        let alpha = norm2(&w);
        let scale = alphas.iter().fold(alpha, |m, &x| m.max(x));
        if alpha <= 1e-14 * scale || scale == 0.0 {
            return Ok(None);
        }
        w.iter_mut().for_each(|x| *x /= alpha);
        us.push(w.clone());
        alphas.push(alpha);

        let mut z = a.tr_mul_vec(&us[j]).expect("shapes agree");
        axpy(-alpha, &vs[j], &mut z);
        reorthogonalize(&mut z, &vs);
        let beta = norm2(&z);
        betas.push(beta);

        let steps = j + 1;
        let exhausted = steps == d;
        if steps >= min_steps && (steps % 4 == 0 || exhausted || beta <= 1e-14 * scale) {
            if let Some(svd) = ritz(&us, &vs, &alphas, &betas, r)? {
                return Ok(Some(svd));
            }
        }
        if exhausted || beta <= 1e-14 * scale {
            return Ok(None);
        }
        z.iter_mut().for_each(|x| *x /= beta);
        vs.push(z);
    }
    Ok(None)
}

/// Ritz triplets from the current projected bidiagonal, if converged.
fn ritz(
    us: &[Vec<f64>],
    vs: &[Vec<f64>],
    alphas: &[f64],
    betas: &[f64],
    r: usize,
) -> Result<Option<Svd>> {
    let k = alphas.len();
    let mut b = Matrix::zeros(k, k);
    for i in 0..k {
        b[(i, i)] = alphas[i];
        if i + 1 < k {
            b[(i, i + 1)] = betas[i];
        }
    }
    let small = dense_svd(&b)?;
    let top = small.singular_values[0];
    let beta_last = betas[k - 1];
    for i in 0..r {
        let resid = beta_last * small.left[(k - 1, i)].abs();
        if resid > RESIDUAL_TOL * top {
            return Ok(None);
        }
    }
    let p = us[0].len();
    let n = vs[0].len();
    let mut left = Matrix::zeros(p, r);
    let mut right = Matrix::zeros(n, r);
    for i in 0..r {
        let lc = left.column_mut(i);
        for (l, u) in us.iter().enumerate() {
            axpy(small.left[(l, i)], u, lc);
        }
        let rc = right.column_mut(i);
        for (l, v) in vs.iter().take(k).enumerate() {
            axpy(small.right[(l, i)], v, rc);
        }
    }
    let svd = Svd {
        left,
        singular_values: small.singular_values[..r].to_vec(),
        right,
        min_dim: p.min(n),
    };
    Ok(Some(canonicalize(sort_descending(svd))))
}

fn reorthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, x);
            axpy(-c, q, x);
        }
    }
}
