//! Thin singular value decomposition.
//!
//! Dense route: Householder bidiagonalisation followed by implicit-shift QR
//! sweeps on the bidiagonal (Golub-Kahan-Reinsch, in the LINPACK `dsvdc`
//! arrangement). Truncated requests on larger matrices go through
//! Golub-Kahan-Lanczos bidiagonalisation instead (see [`super::lanczos`]) and
//! fall back to the dense route when that does not converge.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::lanczos;
use super::matrix::{dot, Matrix};
use super::subspace::SubspaceBasis;
use crate::error::{invalid, Error, Result};

/// QR sweeps allowed per unit of `min(p, n)`.
pub const ITERATIONS_PER_DIM: usize = 100;

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Thin SVD `M = U diag(s) Vᵀ`.
///
/// `singular_values` are nonincreasing. Each left vector has its entry of
/// largest magnitude positive (lowest index on ties); the matching right
/// vector carries the same sign flip so the product is unchanged.
#[derive(Debug, Clone)]
pub struct Svd {
    pub left: Matrix,
    pub singular_values: Vec<f64>,
    pub right: Matrix,
    /// `min(p, n)` of the decomposed matrix; larger than
    /// `singular_values.len()` when the decomposition was truncated.
    pub min_dim: usize,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `σ_j` (1-based), with `σ_j = 0` past `min(p, n)`.
    ///
    /// Returns `None` when `j` lies in the part dropped by truncation.
    pub fn sigma(&self, j: usize) -> Option<f64> {
        assert!(j >= 1, "singular value indices are 1-based");
        if j <= self.singular_values.len() {
            Some(self.singular_values[j - 1])
        } else if j > self.min_dim {
            Some(0.0)
        } else {
            None
        }
    }

    /// Span of the leading `r` left singular vectors.
    pub fn leading_basis(&self, r: usize) -> Result<SubspaceBasis> {
        if r > self.rank() {
            return Err(invalid!(
                "requested {} leading vectors from a rank-{} decomposition",
                r,
                self.rank()
            ));
        }
        Ok(SubspaceBasis::from_orthonormal(
            self.left.leading_columns(r),
        ))
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.left.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        us.matmul(&self.right.transpose())
            .expect("factor shapes are consistent")
    }

    fn truncate(mut self, r: usize) -> Svd {
        if r < self.singular_values.len() {
            self.singular_values.truncate(r);
            self.left = self.left.leading_columns(r);
            self.right = self.right.leading_columns(r);
        }
        self
    }
}

/// Thin SVD of `m`, optionally truncated to the leading `rank` triplets.
pub fn thin_svd(m: &Matrix, rank: Option<usize>) -> Result<Svd> {
    let (p, n) = m.shape();
    if p == 0 || n == 0 {
        return Err(invalid!("cannot decompose an empty {}x{} matrix", p, n));
    }
    if !m.is_finite() {
        return Err(invalid!("matrix has non-finite entries"));
    }
    let d = p.min(n);
    let r = rank.unwrap_or(d);
    if r > d {
        return Err(invalid!("truncation rank {} exceeds min(p, n) = {}", r, d));
    }
    if lanczos::worthwhile(d, r) {
        if let Some(svd) = lanczos::truncated_svd(m, r)? {
            return Ok(svd);
        }
    }
    dense_svd(m).map(|s| s.truncate(r))
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_finite() {
        return Err(invalid!("matrix has non-finite entries"));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Err(invalid!("cannot decompose an empty matrix"));
    }
    let (s, _, _) = if m.rows() >= m.cols() {
        golub_kahan(m.clone(), false, false)?
    } else {
        golub_kahan(m.transpose(), false, false)?
    };
    Ok(s)
}

/// Largest singular value.
pub fn operator_norm(m: &Matrix) -> Result<f64> {
    Ok(thin_svd(m, Some(1))?.singular_values[0])
}

/// Number of singular values above `RANK_TOLERANCE * max(σ₁, 1)`.
pub fn numerical_rank(singular_values: &[f64]) -> usize {
    let top = singular_values.first().copied().unwrap_or(0.0).max(1.0);
    singular_values
        .iter()
        .filter(|&&s| s > RANK_TOLERANCE * top)
        .count()
}

/// Full thin SVD through the dense route.
pub fn dense_svd(m: &Matrix) -> Result<Svd> {
    let (p, n) = m.shape();
    let svd = if p >= n {
        let (s, u, v) = golub_kahan(m.clone(), true, true)?;
        Svd {
            left: u.expect("requested"),
            singular_values: s,
            right: v.expect("requested"),
            min_dim: n,
        }
    } else {
        let (s, u, v) = golub_kahan(m.transpose(), true, true)?;
        Svd {
            left: v.expect("requested"),
            singular_values: s,
            right: u.expect("requested"),
            min_dim: p,
        }
    };
    Ok(canonicalize(sort_descending(svd)))
}

/// Stable descending sort; exactly equal values keep their original order.
pub(crate) fn sort_descending(svd: Svd) -> Svd {
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("singular values are finite")
    });
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return svd;
    }
    let pick = |m: &Matrix| {
        let mut out = Matrix::zeros(m.rows(), k);
        for (dst, &src) in order.iter().enumerate() {
            out.column_mut(dst).copy_from_slice(m.column(src));
        }
        out
    };
    Svd {
        left: pick(&svd.left),
        right: pick(&svd.right),
        singular_values: order.iter().map(|&o| svd.singular_values[o]).collect(),
        min_dim: svd.min_dim,
    }
}

/// Flips each (u_j, v_j) pair so the largest-magnitude entry of u_j is positive.
pub(crate) fn canonicalize(mut svd: Svd) -> Svd {
    for j in 0..svd.singular_values.len() {
        let u = svd.left.column(j);
        let mut best = 0;
        for (i, x) in u.iter().enumerate() {
            if x.abs() > u[best].abs() {
                best = i;
            }
        }
        if u[best] < 0.0 {
            svd.left.column_mut(j).iter_mut().for_each(|x| *x = -*x);
            svd.right.column_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
    svd
}

/// Golub-Kahan-Reinsch on an `m x n` matrix with `m >= n`.
///
/// Returns `(s, U, V)` with `U` of size `m x n` and `V` of size `n x n`,
/// singular values nonnegative and in nonincreasing order.
#[allow(clippy::type_complexity)]
fn golub_kahan(
    mut a: Matrix,
    want_u: bool,
    want_v: bool,
) -> Result<(Vec<f64>, Option<Matrix>, Option<Matrix>)> {
    let (m, n) = a.shape();
    debug_assert!(m >= n && n >= 1);
    let nu = n;
    let mut s = vec![0.0; n.min(m + 1)];
    let mut u = Matrix::zeros(m, nu);
    let mut v = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut work = vec![0.0; m];

    // Reduce to bidiagonal form: diagonal in s, superdiagonal in e.
    let nct = (m - 1).min(n);
    let nrt = n.saturating_sub(2).min(m);
    for k in 0..nct.max(nrt) {
        if k < nct {
            let col = &mut a.column_mut(k)[k..];
            let mut norm = col.iter().fold(0.0f64, |acc, &x| libm::hypot(acc, x));
            if norm != 0.0 {
                if col[0] < 0.0 {
                    norm = -norm;
                }
                col.iter_mut().for_each(|x| *x /= norm);
                col[0] += 1.0;
            }
            s[k] = -norm;
        }
        for j in k + 1..n {
            if k < nct && s[k] != 0.0 {
                let (ck, cj) = a.column_pair_mut(k, j);
                let t = -dot(&ck[k..], &cj[k..]) / ck[k];
                for (x, &h) in cj[k..].iter_mut().zip(&ck[k..]) {
                    *x += t * h;
                }
            }
            e[j] = a[(k, j)];
        }
        if want_u && k < nct {
            u.column_mut(k)[k..].copy_from_slice(&a.column(k)[k..]);
        }
        if k < nrt {
            let mut norm = e[k + 1..]
                .iter()
                .fold(0.0f64, |acc, &x| libm::hypot(acc, x));
            if norm != 0.0 {
                if e[k + 1] < 0.0 {
                    norm = -norm;
                }
                e[k + 1..].iter_mut().for_each(|x| *x /= norm);
                e[k + 1] += 1.0;
            }
            e[k] = -norm;
            if k + 1 < m && e[k] != 0.0 {
                work[k + 1..].iter_mut().for_each(|w| *w = 0.0);
                for j in k + 1..n {
                    let c = &a.column(j)[k + 1..];
                    for (w, &x) in work[k + 1..].iter_mut().zip(c) {
                        *w += e[j] * x;
                    }
                }
                for j in k + 1..n {
                    let t = -e[j] / e[k + 1];
                    let c = &mut a.column_mut(j)[k + 1..];
                    for (x, &w) in c.iter_mut().zip(&work[k + 1..]) {
                        *x += t * w;
                    }
                }
            }
            if want_v {
                v.column_mut(k)[k + 1..].copy_from_slice(&e[k + 1..]);
            }
        }
    }

    // Final bidiagonal of order pn.
    let mut pn = n.min(m + 1);
    if nct < n {
        s[nct] = a[(nct, nct)];
    }
    if m < pn {
        s[pn - 1] = 0.0;
    }
    if nrt + 1 < pn {
        e[nrt] = a[(nrt, pn - 1)];
    }
    e[pn - 1] = 0.0;

    if want_u {
        for j in nct..nu {
            u.column_mut(j).iter_mut().for_each(|x| *x = 0.0);
            u[(j, j)] = 1.0;
        }
        for k in (0..nct).rev() {
            if s[k] != 0.0 {
                for j in k + 1..nu {
                    let (ck, cj) = u.column_pair_mut(k, j);
                    let t = -dot(&ck[k..], &cj[k..]) / ck[k];
                    for (x, &h) in cj[k..].iter_mut().zip(&ck[k..]) {
                        *x += t * h;
                    }
                }
                let ck = u.column_mut(k);
                ck[k..].iter_mut().for_each(|x| *x = -*x);
                ck[k] += 1.0;
                ck[..k].iter_mut().for_each(|x| *x = 0.0);
            } else {
                let ck = u.column_mut(k);
                ck.iter_mut().for_each(|x| *x = 0.0);
                ck[k] = 1.0;
            }
        }
    }

    if want_v {
        for k in (0..n).rev() {
            if k < nrt && e[k] != 0.0 {
                for j in k + 1..nu {
                    let (ck, cj) = v.column_pair_mut(k, j);
                    let t = -dot(&ck[k + 1..], &cj[k + 1..]) / ck[k + 1];
                    for (x, &h) in cj[k + 1..].iter_mut().zip(&ck[k + 1..]) {
                        *x += t * h;
                    }
                }
            }
            let ck = v.column_mut(k);
            ck.iter_mut().for_each(|x| *x = 0.0);
            ck[k] = 1.0;
        }
    }

    // Implicit-shift QR on the bidiagonal.
    let rotate = |mat: &mut Matrix, a: usize, b: usize, cs: f64, sn: f64| {
        let (ca, cb) = mat.column_pair_mut(a, b);
        for (x, y) in ca.iter_mut().zip(cb.iter_mut()) {
            let t = cs * *x + sn * *y;
            *y = -sn * *x + cs * *y;
            *x = t;
        }
    };
    let pp = pn - 1;
    let eps = f64::EPSILON;
    let tiny = libm::pow(2.0, -966.0);
    let cap = ITERATIONS_PER_DIM * n;
    let mut sweeps = 0usize;
    while pn > 0 {
        // Inspect for negligible elements in s and e.
        let mut k = pn as isize - 2;
        while k >= 0 {
            let ku = k as usize;
            if e[ku].abs() <= tiny + eps * (s[ku].abs() + s[ku + 1].abs()) {
                e[ku] = 0.0;
                break;
            }
            k -= 1;
        }
        let kase;
        if k == pn as isize - 2 {
            kase = 4;
        } else {
            let mut ks = pn as isize - 1;
            while ks > k {
                let ksu = ks as usize;
                let t = (if ksu != pn { e[ksu].abs() } else { 0.0 })
                    + (if ks != k + 1 { e[ksu - 1].abs() } else { 0.0 });
                if s[ksu].abs() <= tiny + eps * t {
                    s[ksu] = 0.0;
                    break;
                }
                ks -= 1;
            }
            if ks == k {
                kase = 3;
            } else if ks == pn as isize - 1 {
                kase = 1;
            } else {
                kase = 2;
                k = ks;
            }
        }
        let k = (k + 1) as usize;

        match kase {
            // Deflate negligible s[pn-1].
            1 => {
                let mut f = e[pn - 2];
                e[pn - 2] = 0.0;
                for j in (k..=pn - 2).rev() {
                    let t = libm::hypot(s[j], f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    if j != k {
                        f = -sn * e[j - 1];
                        e[j - 1] *= cs;
                    }
                    if want_v {
                        rotate(&mut v, j, pn - 1, cs, sn);
                    }
                }
            }
            // Split at negligible s[k-1].
            2 => {
                let mut f = e[k - 1];
                e[k - 1] = 0.0;
                for j in k..pn {
                    let t = libm::hypot(s[j], f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    f = -sn * e[j];
                    e[j] *= cs;
                    if want_u {
                        rotate(&mut u, j, k - 1, cs, sn);
                    }
                }
            }
            // One shifted QR sweep.
            3 => {
                sweeps += 1;
                if sweeps > cap {
                    return Err(Error::NumericalFailure(format!(
                        "SVD did not converge within {} QR sweeps",
                        cap
                    )));
                }
                let scale = s[pn - 1]
                    .abs()
                    .max(s[pn - 2].abs())
                    .max(e[pn - 2].abs())
                    .max(s[k].abs())
                    .max(e[k].abs());
                let sp = s[pn - 1] / scale;
                let spm1 = s[pn - 2] / scale;
                let epm1 = e[pn - 2] / scale;
                let sk = s[k] / scale;
                let ek = e[k] / scale;
                let b = ((spm1 + sp) * (spm1 - sp) + epm1 * epm1) / 2.0;
                let c = (sp * epm1) * (sp * epm1);
                let mut shift = 0.0;
                if b != 0.0 || c != 0.0 {
                    shift = libm::sqrt(b * b + c);
                    if b < 0.0 {
                        shift = -shift;
                    }
                    shift = c / (b + shift);
                }
                let mut f = (sk + sp) * (sk - sp) + shift;
                let mut g = sk * ek;
                for j in k..pn - 1 {
                    let t = libm::hypot(f, g);
                    let cs = f / t;
                    let sn = g / t;
                    if j != k {
                        e[j - 1] = t;
                    }
                    f = cs * s[j] + sn * e[j];
                    e[j] = cs * e[j] - sn * s[j];
                    g = sn * s[j + 1];
                    s[j + 1] *= cs;
                    if want_v {
                        rotate(&mut v, j, j + 1, cs, sn);
                    }
                    let t = libm::hypot(f, g);
                    let cs = f / t;
                    let sn = g / t;
                    s[j] = t;
                    f = cs * e[j] + sn * s[j + 1];
                    s[j + 1] = -sn * e[j] + cs * s[j + 1];
                    g = sn * e[j + 1];
                    e[j + 1] *= cs;
                    if want_u && j < m - 1 {
                        rotate(&mut u, j, j + 1, cs, sn);
                    }
                }
                e[pn - 2] = f;
            }
            // Convergence of s[k].
            _ => {
                let mut k = k;
                if s[k] <= 0.0 {
                    s[k] = if s[k] < 0.0 { -s[k] } else { 0.0 };
                    if want_v {
                        v.column_mut(k).iter_mut().for_each(|x| *x = -*x);
                    }
                }
                while k < pp {
                    if s[k] >= s[k + 1] {
                        break;
                    }
                    s.swap(k, k + 1);
                    if want_v {
                        swap_columns(&mut v, k, k + 1);
                    }
                    if want_u && k < m - 1 {
                        swap_columns(&mut u, k, k + 1);
                    }
                    k += 1;
                }
                pn -= 1;
            }
        }
    }
    s.truncate(n);
    Ok((s, want_u.then_some(u), want_v.then_some(v)))
}

fn swap_columns(m: &mut Matrix, a: usize, b: usize) {
    let (x, y) = m.column_pair_mut(a, b);
    x.swap_with_slice(y);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_orthonormal(m: &Matrix, tol: f64) {
        let g = m.tr_matmul(m).unwrap();
        let dev = g.sub(&Matrix::identity(m.cols())).unwrap().frobenius_norm();
        assert!(dev < tol, "orthonormality defect {dev}");
    }

    fn check(m: &Matrix) -> Svd {
        let svd = thin_svd(m, None).unwrap();
        assert_orthonormal(&svd.left, 1e-10);
        assert_orthonormal(&svd.right, 1e-10);
        for w in svd.singular_values.windows(2) {
            assert!(w[0] >= w[1] && w[1] >= 0.0);
        }
        let err = svd.reconstruct().sub(m).unwrap().frobenius_norm();
        assert!(
            err <= 1e-8 * (1.0 + m.frobenius_norm()),
            "reconstruction {err}"
        );
        svd
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let svd = check(&Matrix::identity(3));
        assert_eq!(svd.singular_values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn rank_one_outer_product() {
        let m = Matrix::from_fn(4, 4, |_, _| 10.0 * 0.25);
        let svd = check(&m);
        assert!((svd.singular_values[0] - 10.0).abs() < 1e-12);
        for &s in &svd.singular_values[1..] {
            assert!(s.abs() < 1e-12);
        }
        for &x in svd.left.column(0) {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_tall_and_degenerate_shapes() {
        let wide = Matrix::from_fn(2, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let tall = wide.transpose();
        let sw = check(&wide);
        let st = check(&tall);
        for (a, b) in sw.singular_values.iter().zip(&st.singular_values) {
            assert!((a - b).abs() < 1e-12);
        }
        check(&Matrix::zeros(3, 2));
        check(&Matrix::from_row_major(1, 1, &[-2.0]).unwrap());
        check(&Matrix::from_row_major(1, 3, &[1.0, 2.0, 2.0]).unwrap());
        check(&Matrix::from_row_major(3, 1, &[0.0, -3.0, 4.0]).unwrap());
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let m = Matrix::from_row_major(3, 2, &[1.0, -2.0, -3.0, 0.5, 0.2, 4.0]).unwrap();
        let svd = check(&m);
        for j in 0..2 {
            let c = svd.left.column(j);
            let big = c
                .iter()
                .cloned()
                .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_rank() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(thin_svd(&m, None), Err(Error::InvalidInput(_))));
        assert!(thin_svd(&Matrix::identity(2), Some(3)).is_err());
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let m = Matrix::from_row_major(2, 2, &[3.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((operator_norm(&m).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(operator_norm(&Matrix::zeros(3, 4)).unwrap(), 0.0);
    }

    #[test]
    fn sigma_padding_and_truncation() {
        let m = Matrix::from_fn(3, 5, |i, j| {
            (i + 2 * j) as f64 + if i == j { 1.0 } else { 0.0 }
        });
        let full = thin_svd(&m, None).unwrap();
        assert_eq!(full.sigma(4), Some(0.0));
        let t = thin_svd(&m, Some(1)).unwrap();
        assert_eq!(t.rank(), 1);
        assert_eq!(t.sigma(2), None);
        assert_eq!(t.sigma(4), Some(0.0));
    }

    #[test]
    fn numerical_rank_threshold() {
        assert_eq!(numerical_rank(&[5.0, 1e-8, 1e-10]), 2);
        assert_eq!(numerical_rank(&[0.5, 5e-10]), 1);
        assert_eq!(numerical_rank(&[0.0, 0.0]), 0);
    }
}
