//! Deterministic data-parallel primitives.
//!
//! Reductions here are chunked with a fixed chunk size and the partial sums
//! are folded in chunk order, so the result is bit-identical whether the
//! `parallel` feature is enabled or not, and independent of the thread count.

/// Fixed reduction chunk; changing it changes the floating-point result.
pub const CHUNK: usize = 4096;

/// Sums `f(i)` for `i in 0..n` with the fixed chunked reduction order.
pub fn indexed_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partials = chunk_partials(n, &f);
    partials.into_iter().fold(0.0, |a, b| a + b)
}

/// Sequential reference path for [`indexed_sum`]; always available so the
/// two can be compared even when the `parallel` feature is on.
pub fn indexed_sum_seq<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let mut part = 0.0;
        for i in start..end {
            part += f(i);
        }
        total += part;
        start = end;
    }
    total
}

#[cfg(feature = "parallel")]
fn chunk_partials<F>(n: usize, f: &F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    use rayon::prelude::*;
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut part = 0.0;
            for i in start..end {
                part += f(i);
            }
            part
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn chunk_partials<F>(n: usize, f: &F) -> Vec<f64>
where
    F: Fn(usize) -> f64,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .map(|k| {
            let start = k * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut part = 0.0;
            for i in start..end {
                part += f(i);
            }
            part
        })
        .collect()
}

/// Maps fixed-size index chunks through `map` and folds the per-chunk values
/// in chunk order; deterministic under any thread count.
pub fn chunk_map_fold<T, F, G>(n: usize, map: F, fold: G) -> Option<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync,
    G: Fn(T, T) -> T,
{
    let chunks = n.div_ceil(CHUNK);
    let bounds = |k: usize| {
        let start = k * CHUNK;
        (start, (start + CHUNK).min(n))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<T> = {
        use rayon::prelude::*;
        (0..chunks)
            .into_par_iter()
            .map(|k| {
                let (s, e) = bounds(k);
                map(s, e)
            })
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<T> = (0..chunks)
        .map(|k| {
            let (s, e) = bounds(k);
            map(s, e)
        })
        .collect();
    parts.into_iter().reduce(fold)
}

/// Runs `f` on disjoint output ranges of `out`, in parallel when enabled.
///
/// Each range is processed by exactly one closure call, so the contents of
/// `out` never depend on scheduling.
pub fn for_each_range<F>(out: &mut [f64], range_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(range_len)
            .enumerate()
            .for_each(|(k, chunk)| f(k * range_len, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(range_len)
            .enumerate()
            .for_each(|(k, chunk)| f(k * range_len, chunk));
    }
}
