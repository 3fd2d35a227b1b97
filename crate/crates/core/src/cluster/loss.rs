//! Misclustering loss: the smallest fraction of mismatched labels over all
//! bijective relabellings of the truth.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::mixture::check_labels;

/// `agreement[b][a] = |{i : z*_i = b, z_i = a}|`.
fn agreement(z: &[usize], z_star: &[usize], k: usize) -> Result<Vec<Vec<i64>>> {
    if z.len() != z_star.len() {
        return Err(invalid!(
            "label vectors differ in length ({} vs {})",
            z.len(),
            z_star.len()
        ));
    }
    if z.is_empty() {
        return Err(invalid!("label vectors are empty"));
    }
    check_labels(z, k)?;
    check_labels(z_star, k)?;
    let mut m = vec![vec![0i64; k]; k];
    for (&a, &b) in z.iter().zip(z_star) {
        m[b][a] += 1;
    }
    Ok(m)
}

/// `(ℓ, φ)` where `φ[b]` is the estimated label matched to true label `b`.
/// Solved exactly as an assignment problem on the agreement matrix.
pub fn misclustering_loss(z: &[usize], z_star: &[usize], k: usize) -> Result<(f64, Vec<usize>)> {
    let m = agreement(z, z_star, k)?;
    let perm = max_weight_matching(&m);
    Ok((mismatch_fraction(&m, &perm, z.len()), perm))
}

/// Same result by scanning all `k!` bijections; first in lexicographic order wins ties.
pub fn misclustering_loss_exhaustive(
    z: &[usize],
    z_star: &[usize],
    k: usize,
) -> Result<(f64, Vec<usize>)> {
    let m = agreement(z, z_star, k)?;
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (i64::MIN, perm.clone());
    loop {
        let score: i64 = perm.iter().enumerate().map(|(b, &a)| m[b][a]).sum();
        if score > best.0 {
            best = (score, perm.clone());
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok((mismatch_fraction(&m, &best.1, z.len()), best.1))
}

fn mismatch_fraction(m: &[Vec<i64>], perm: &[usize], n: usize) -> f64 {
    let agree: i64 = perm.iter().enumerate().map(|(b, &a)| m[b][a]).sum();
    (n as i64 - agree) as f64 / n as f64
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len())
        .rev()
        .find(|&j| p[j] > p[i - 1])
        .expect("exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Hungarian algorithm (shortest augmenting paths with potentials),
/// maximising `Σ_b m[b][φ(b)]`.
fn max_weight_matching(m: &[Vec<i64>]) -> Vec<usize> {
    let k = m.len();
    let top = m.iter().flatten().copied().max().unwrap_or(0);
    let cost = |b: usize, a: usize| top - m[b][a];
    // 1-based rows/columns; column 0 is the virtual start
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut owner = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for row in 1..=k {
        owner[0] = row;
        let mut col = 0;
        let mut minv = vec![i64::MAX; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[col] = true;
            let r = owner[col];
            let mut delta = i64::MAX;
            let mut next = 0;
            for c in 1..=k {
                if !used[c] {
                    let cur = cost(r - 1, c - 1) - u[r] - v[c];
                    if cur < minv[c] {
                        minv[c] = cur;
                        way[c] = col;
                    }
                    if minv[c] < delta {
                        delta = minv[c];
                        next = c;
                    }
                }
            }
            for c in 0..=k {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col = next;
            if owner[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            owner[col] = owner[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; k];
    for c in 1..=k {
        perm[owner[c] - 1] = c - 1;
    }
    perm
}
