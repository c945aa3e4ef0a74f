//! Deterministic reductions.
//!
//! Every row of a pairwise sum is accumulated sequentially in index order and
//! the row totals are combined by a fixed blocked tree, so results do not
//! depend on how many worker threads rayon happens to use.

use rayon::prelude::*;

/// Below this many rows the thread-pool overhead dominates.
const PAR_ROWS: usize = 256;
const BLOCK: usize = 32;

/// Evaluates `f` for every row index, in parallel for large `m`.
pub(crate) fn map_rows<F>(m: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if m >= PAR_ROWS {
        (0..m).into_par_iter().map(f).collect()
    } else {
        (0..m).map(f).collect()
    }
}

/// Blocked pairwise summation with a fixed tree shape.
pub(crate) fn tree_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    tree_sum(&values[..mid]) + tree_sum(&values[mid..])
}

/// `|a|^p`, with the common `p = 2` case kept exact and cheap.
#[inline]
pub(crate) fn abs_pow(a: f64, p: f64) -> f64 {
    if p == 2.0 {
        a * a
    } else {
        a.abs().powf(p)
    }
}

/// `|a|^{p-2} a`, extended by `0` at `a = 0`.
#[inline]
pub(crate) fn signed_pow(a: f64, p: f64) -> f64 {
    if p == 2.0 {
        a
    } else if a == 0.0 {
        0.0
    } else {
        a.signum() * a.abs().powf(p - 1.0)
    }
}
