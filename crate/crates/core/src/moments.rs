//! Empirical moments and configuration-frequency tables.
//!
//! Moments are exact rational averages of `±1` entries, accumulated in
//! integers, so saturation (`|q_i| = 1`) is detected by exact comparison.

use crate::error::{CoreError, CoreResult};
use crate::spin::SpinMatrix;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Largest system size for which a configuration table is built; keeps the
/// bit-pattern encoding inside a 32-bit word with headroom.
pub const CONFIG_TABLE_MAX_SPINS: usize = 26;

/// First moments `q_i` and second moments `Q_ij` of a spin system.
#[derive(Debug, Clone)]
pub struct MomentSet {
    mean: DVector<f64>,
    pair: DMatrix<f64>,
    sample_count: usize,
}

impl MomentSet {
    /// Validates the ranges, symmetry, and unit diagonal.
    pub fn new(mean: DVector<f64>, pair: DMatrix<f64>, sample_count: usize) -> CoreResult<Self> {
        let n = mean.len();
        if pair.nrows() != n || pair.ncols() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "mean has {} entries but pair matrix is {}x{}",
                n,
                pair.nrows(),
                pair.ncols()
            )));
        }
        for i in 0..n {
            if !(mean[i].is_finite() && mean[i].abs() <= 1.0) {
                return Err(CoreError::InvalidInput(format!(
                    "mean orientation {} out of [-1, 1]: {}",
                    i, mean[i]
                )));
            }
            if (pair[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(CoreError::InvalidInput(format!(
                    "pair moment diagonal must be 1, found {} at {}",
                    pair[(i, i)],
                    i
                )));
            }
            for j in 0..n {
                if !(pair[(i, j)].is_finite() && pair[(i, j)].abs() <= 1.0 + 1e-12) {
                    return Err(CoreError::InvalidInput(format!(
                        "pair moment ({i}, {j}) out of [-1, 1]: {}",
                        pair[(i, j)]
                    )));
                }
                if (pair[(i, j)] - pair[(j, i)]).abs() > 1e-12 {
                    return Err(CoreError::InvalidInput(format!(
                        "pair moments not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut pair = pair;
        for i in 0..n {
            pair[(i, i)] = 1.0;
        }
        Ok(Self {
            mean,
            pair,
            sample_count,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn pair(&self) -> &DMatrix<f64> {
        &self.pair
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Covariance matrix `C_ij = Q_ij - q_i q_j`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.pair[(i, j)] - self.mean[i] * self.mean[j])
    }

    /// True when some first moment or off-diagonal pair moment sits exactly
    /// at `±1`.
    pub fn is_saturated(&self) -> bool {
        let n = self.len();
        self.mean.iter().any(|q| q.abs() >= 1.0)
            || (0..n).any(|i| (0..n).any(|j| i != j && self.pair[(i, j)].abs() >= 1.0))
    }

    /// Shrinks moments as if one pseudocount were added to each of the `2^N`
    /// configuration counts: a uniform admixture leaves the diagonal at 1 and
    /// multiplies every other moment by `T / (T + 2^N)`.
    ///
    /// Applied only when [`MomentSet::is_saturated`] holds; otherwise the
    /// moments are returned unchanged.
    pub fn smoothed(&self) -> CoreResult<MomentSet> {
        if !self.is_saturated() {
            return Ok(self.clone());
        }
        let t = self.sample_count as f64;
        if self.sample_count == 0 {
            return Err(CoreError::DegenerateMoments(
                "cannot smooth moments with zero sample count".into(),
            ));
        }
        let states = (self.len() as f64).exp2();
        let factor = t / (t + states);
        if factor <= 0.0 || !factor.is_finite() || factor < 1e-6 {
            return Err(CoreError::DegenerateMoments(format!(
                "pseudocount smoothing factor {factor:e} would erase the moments \
                 (T = {}, N = {})",
                self.sample_count,
                self.len()
            )));
        }
        let n = self.len();
        let mean = self.mean.map(|q| q * factor);
        let pair = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                self.pair[(i, j)] * factor
            }
        });
        MomentSet::new(mean, pair, self.sample_count)
    }
}

/// Sample moments of a spin matrix: `q_i = mean_t s_it`,
/// `Q_ij = mean_t s_it s_jt`.
pub fn empirical_moments(spins: &SpinMatrix) -> MomentSet {
    let t = spins.num_days();
    let n = spins.num_assets();
    let m = spins.spins();
    let mut mean_acc = vec![0i64; n];
    let mut pair_acc = vec![0i64; n * n];
    for i in 0..n {
        let col_i = m.column(i);
        let mut s = 0i64;
        for &v in col_i.iter() {
            s += v as i64;
        }
        mean_acc[i] = s;
        for j in i..n {
            let col_j = m.column(j);
            let mut p = 0i64;
            for (&a, &b) in col_i.iter().zip(col_j.iter()) {
                p += (a as i64) * (b as i64);
            }
            pair_acc[i * n + j] = p;
            pair_acc[j * n + i] = p;
        }
    }
    let tf = t as f64;
    let mean = DVector::from_fn(n, |i, _| mean_acc[i] as f64 / tf);
    let pair = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            pair_acc[i * n + j] as f64 / tf
        }
    });
    MomentSet {
        mean,
        pair,
        sample_count: t,
    }
}

/// A distribution over `±1` configurations of `N` spins.
///
/// Configurations are encoded as `N`-bit patterns where bit `b` set means
/// spin `b` is `+1`.
pub trait ConfigDistribution {
    fn num_spins(&self) -> usize;

    /// Probability of the configuration encoded by `pattern`.
    fn probability(&self, pattern: u32) -> f64;

    /// Visits every configuration with nonzero probability.
    fn for_each_nonzero(&self, f: &mut dyn FnMut(u32, f64));
}

/// Normalized frequency table of observed spin configurations.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    num_spins: usize,
    entries: BTreeMap<u32, f64>,
}

impl EmpiricalDistribution {
    pub fn entries(&self) -> &BTreeMap<u32, f64> {
        &self.entries
    }
}

impl ConfigDistribution for EmpiricalDistribution {
    fn num_spins(&self) -> usize {
        self.num_spins
    }

    fn probability(&self, pattern: u32) -> f64 {
        self.entries.get(&pattern).copied().unwrap_or(0.0)
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(u32, f64)) {
        for (&pattern, &p) in &self.entries {
            if p > 0.0 {
                f(pattern, p);
            }
        }
    }
}

/// Encodes one spin row as a bit pattern (bit `b` set when spin `b` is `+1`).
///
/// Panics beyond 32 spins; callers stay inside [`CONFIG_TABLE_MAX_SPINS`].
pub fn encode_row(row: &[i8]) -> u32 {
    assert!(row.len() <= 32, "bit patterns hold at most 32 spins");
    row.iter()
        .enumerate()
        .fold(0u32, |acc, (b, &s)| if s > 0 { acc | (1 << b) } else { acc })
}

/// Decodes a bit pattern into `±1` spins.
pub fn decode_pattern(pattern: u32, n: usize) -> Vec<i8> {
    (0..n)
        .map(|b| if pattern >> b & 1 == 1 { 1 } else { -1 })
        .collect()
}

/// Frequency of each observed configuration; unobserved ones are absent.
pub fn empirical_distribution(spins: &SpinMatrix) -> CoreResult<EmpiricalDistribution> {
    let n = spins.num_assets();
    if n > CONFIG_TABLE_MAX_SPINS {
        return Err(CoreError::CapacityExceeded(format!(
            "configuration table supports at most {CONFIG_TABLE_MAX_SPINS} spins, got {n}"
        )));
    }
    let t = spins.num_days();
    let m = spins.spins();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut row = vec![0i8; n];
    for r in 0..t {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = m[(r, c)];
        }
        *counts.entry(encode_row(&row)).or_insert(0) += 1;
    }
    let entries = counts
        .into_iter()
        .map(|(pattern, c)| (pattern, c as f64 / t as f64))
        .collect();
    Ok(EmpiricalDistribution {
        num_spins: n,
        entries,
    })
}

/// Probability-weighted moments of any configuration distribution.
pub fn moments_of_distribution<D: ConfigDistribution + ?Sized>(dist: &D) -> MomentSet {
    let n = dist.num_spins();
    let mut mean = DVector::zeros(n);
    let mut pair = DMatrix::zeros(n, n);
    dist.for_each_nonzero(&mut |pattern, p| {
        let spins = decode_pattern(pattern, n);
        for i in 0..n {
            let si = spins[i] as f64;
            mean[i] += p * si;
            for j in i..n {
                pair[(i, j)] += p * si * spins[j] as f64;
            }
        }
    });
    for i in 0..n {
        pair[(i, i)] = 1.0;
        for j in i + 1..n {
            pair[(j, i)] = pair[(i, j)];
        }
    }
    MomentSet {
        mean,
        pair,
        sample_count: 0,
    }
}
