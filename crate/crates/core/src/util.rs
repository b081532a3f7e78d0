//! Small numeric helpers and deterministic parallel reductions.
//!
//! Reductions over configuration space use fixed chunk boundaries and combine
//! partial results in chunk order, so results are bit-identical regardless of
//! thread count or scheduling.

use rayon::prelude::*;
use std::ops::Range;

/// Fixed chunk length for parallel sweeps over configuration space.
pub(crate) const CHUNK: usize = 1 << 16;

fn chunk_ranges(len: usize) -> Vec<Range<usize>> {
    (0..len)
        .step_by(CHUNK)
        .map(|start| start..(start + CHUNK).min(len))
        .collect()
}

/// Sum `f` over fixed chunks of `0..len`, combining partials in chunk order.
pub(crate) fn par_sum(len: usize, f: impl Fn(Range<usize>) -> f64 + Sync + Send) -> f64 {
    if len <= CHUNK {
        return f(0..len);
    }
    let partials: Vec<f64> = chunk_ranges(len).into_par_iter().map(f).collect();
    partials.into_iter().sum()
}

/// Maximum of `f` over fixed chunks of `0..len`.
pub(crate) fn par_max(len: usize, f: impl Fn(Range<usize>) -> f64 + Sync + Send) -> f64 {
    if len <= CHUNK {
        return f(0..len);
    }
    let partials: Vec<f64> = chunk_ranges(len).into_par_iter().map(f).collect();
    partials.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Map fixed chunks of `0..len` and fold the per-chunk outputs in chunk order.
pub(crate) fn par_map_fold<A: Send>(
    len: usize,
    map: impl Fn(Range<usize>) -> A + Sync + Send,
    mut fold: impl FnMut(A, A) -> A,
) -> Option<A> {
    let partials: Vec<A> = chunk_ranges(len).into_par_iter().map(map).collect();
    let mut it = partials.into_iter();
    let first = it.next()?;
    Some(it.fold(first, &mut fold))
}

/// ln(1 + e^x) without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function 1 / (1 + e^{-x}).
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pearson correlation of two equal-length samples; `None` when either side
/// has zero variance.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.is_empty() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
