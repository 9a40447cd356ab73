//! Deterministic reductions over path index.
//!
//! Paths are grouped into fixed blocks of [`BLOCK`] consecutive indices.
//! Each block is accumulated sequentially (possibly on a worker thread) and
//! block partials are combined by a pairwise tree whose shape depends only
//! on the number of blocks. The result is therefore bit-identical for any
//! worker count.

use rayon::prelude::*;

pub const BLOCK: usize = 256;

/// `Σ_n f(n, acc)` for vector-valued contributions of length `width`.
/// `f` adds path `n`'s contribution into `acc`.
pub fn tree_sum_by<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    if blocks == 0 {
        return vec![0.0; width];
    }
    let partials: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; width];
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                f(i, &mut acc);
            }
            acc
        })
        .collect();
    pairwise(partials)
}

/// Like [`tree_sum_by`], but `f` accumulates a whole block of indices at once.
pub fn tree_sum_blocks<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    if blocks == 0 {
        return vec![0.0; width];
    }
    let partials: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; width];
            f(b * BLOCK..((b + 1) * BLOCK).min(n), &mut acc);
            acc
        })
        .collect();
    pairwise(partials)
}

fn pairwise(mut level: Vec<Vec<f64>>) -> Vec<f64> {
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        level = next;
    }
    level.pop().unwrap_or_default()
}

/// Scalar sum of `f(i)` for `i < n`.
pub fn tree_sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    tree_sum_by(n, 1, |i, acc| acc[0] += f(i))[0]
}

pub fn tree_sum_slice<F>(xs: &[f64], f: F) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    tree_sum_indexed(xs.len(), |i| f(xs[i]))
}

/// Mean of the `width`-vectors stored contiguously in `slice`.
pub fn mean_rows(slice: &[f64], width: usize) -> Vec<f64> {
    let n = slice.len() / width;
    let mut s = tree_sum_by(n, width, |i, acc| {
        for (a, v) in acc.iter_mut().zip(&slice[i * width..(i + 1) * width]) {
            *a += v;
        }
    });
    for v in &mut s {
        *v /= n as f64;
    }
    s
}
