//! Lexicographic k-subset enumeration, split into rank ranges for parallel sweeps.

use rand::Rng;
use rayon::prelude::*;

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
pub fn unrank(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let mut candidate = next;
        loop {
            let remaining = binomial(n - candidate - 1, k - slot - 1);
            if rank < remaining {
                break;
            }
            rank -= remaining;
            candidate += 1;
        }
        out.push(candidate);
        next = candidate + 1;
    }
    out
}

/// Advance to the lexicographically next k-subset; false when exhausted.
pub fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in (i + 1)..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

const CHUNK: u64 = 2048;

/// Fold every k-subset of `0..n` in parallel and reduce the per-chunk results.
///
/// `fold(acc, subset)` sees the subsets of one chunk in lexicographic order;
/// `reduce` must be associative and commutative for the result to be schedule
/// independent.
pub fn par_fold_subsets<T, F, R>(n: usize, k: usize, identity: impl Fn() -> T + Sync, fold: F, reduce: R) -> T
where
    T: Send,
    F: Fn(T, &[usize]) -> T + Sync,
    R: Fn(T, T) -> T + Sync,
{
    let total = binomial(n, k);
    let chunks = total.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut subset = unrank(n, k, start);
            let mut acc = identity();
            for rank in start..end {
                acc = fold(acc, &subset);
                if rank + 1 < end {
                    next_combination(&mut subset, n);
                }
            }
            acc
        })
        .reduce(&identity, &reduce)
}

/// Uniformly random sorted k-subset of `0..n` (partial Fisher–Yates).
pub fn random_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut out = pool[..k].to_vec();
    out.sort_unstable();
    out
}
