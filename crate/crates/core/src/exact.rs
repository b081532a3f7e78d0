//! Exhaustive-enumeration engine for small systems: partition function,
//! model moments, entropy, Kullback-Leibler divergence, and maximum-entropy
//! fitting by moment matching.
//!
//! The Gibbs weight of a configuration is `exp(U(s))` with
//! `U(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i`; for a symmetric
//! zero-diagonal coupling matrix this equals the half-double-sum form, so one
//! canonical expression is used throughout.

use crate::error::{CoreError, CoreResult};
use crate::moments::{
    decode_pattern, empirical_distribution, empirical_moments, moments_of_distribution,
    ConfigDistribution, MomentSet,
};
use crate::spin::SpinMatrix;
use crate::util::{par_map_fold, par_max, par_sum, CHUNK};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Largest system enumerated exhaustively (`2^25` states, ~270 MB of
/// probabilities). Larger systems go through the sampler.
pub const ENUMERATION_MAX_SPINS: usize = 25;

/// Symmetric pairwise couplings plus external fields.
///
/// The diagonal of the coupling matrix is exactly zero unless the model was
/// produced by a fit whose diagonal carries expansion diagnostics, in which
/// case `diagonal_meaningful` is set and the diagonal never enters energies
/// or local fields.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingModel {
    labels: Vec<String>,
    couplings: DMatrix<f64>,
    fields: DVector<f64>,
    diagonal_meaningful: bool,
}

impl CouplingModel {
    /// A model with a structurally zero diagonal.
    pub fn new(
        labels: Vec<String>,
        couplings: DMatrix<f64>,
        fields: DVector<f64>,
    ) -> CoreResult<Self> {
        Self::build(labels, couplings, fields, false)
    }

    /// A model whose diagonal carries fit diagnostics and is kept as given.
    pub fn with_meaningful_diagonal(
        labels: Vec<String>,
        couplings: DMatrix<f64>,
        fields: DVector<f64>,
    ) -> CoreResult<Self> {
        Self::build(labels, couplings, fields, true)
    }

    fn build(
        labels: Vec<String>,
        couplings: DMatrix<f64>,
        fields: DVector<f64>,
        diagonal_meaningful: bool,
    ) -> CoreResult<Self> {
        let n = fields.len();
        if couplings.nrows() != n || couplings.ncols() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "couplings are {}x{} but there are {} fields",
                couplings.nrows(),
                couplings.ncols(),
                n
            )));
        }
        if labels.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "{} labels for {} spins",
                labels.len(),
                n
            )));
        }
        if couplings.iter().any(|v| !v.is_finite()) || fields.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidInput(
                "model parameters must be finite".into(),
            ));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (couplings[(i, j)] - couplings[(j, i)]).abs() > 1e-12 {
                    return Err(CoreError::InvalidInput(format!(
                        "couplings not symmetric at ({i}, {j})"
                    )));
                }
            }
            if !diagonal_meaningful && couplings[(i, i)] != 0.0 {
                return Err(CoreError::InvalidInput(format!(
                    "coupling diagonal must be zero (index {i}); use \
                     with_meaningful_diagonal for diagnostic diagonals"
                )));
            }
        }
        Ok(Self {
            labels,
            couplings,
            fields,
            diagonal_meaningful,
        })
    }

    /// Zero couplings and fields over `labels`.
    pub fn zeros(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            couplings: DMatrix::zeros(n, n),
            fields: DVector::zeros(n),
            diagonal_meaningful: false,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }

    pub fn fields(&self) -> &DVector<f64> {
        &self.fields
    }

    pub fn diagonal_meaningful(&self) -> bool {
        self.diagonal_meaningful
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Local field `h_i + sum_{j != i} J_ij s_j` at site `i`.
    pub fn local_field(&self, site: usize, state: &[i8]) -> f64 {
        let n = self.len();
        let mut acc = self.fields[site];
        for j in 0..n {
            if j != site {
                acc += self.couplings[(site, j)] * state[j] as f64;
            }
        }
        acc
    }
}

/// Full Gibbs distribution of a model over all `2^N` configurations.
#[derive(Debug, Clone)]
pub struct ModelDistribution {
    model: CouplingModel,
    log_partition: f64,
    probabilities: Vec<f64>,
}

impl ModelDistribution {
    pub fn model(&self) -> &CouplingModel {
        &self.model
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

impl ConfigDistribution for ModelDistribution {
    fn num_spins(&self) -> usize {
        self.model.len()
    }

    fn probability(&self, pattern: u32) -> f64 {
        self.probabilities[pattern as usize]
    }

    fn for_each_nonzero(&self, f: &mut dyn FnMut(u32, f64)) {
        for (pattern, &p) in self.probabilities.iter().enumerate() {
            f(pattern as u32, p);
        }
    }
}

/// Total utility `U(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i`.
pub fn utility(model: &CouplingModel, config: &[i8]) -> CoreResult<f64> {
    let n = model.len();
    if config.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "configuration has {} spins, model has {}",
            config.len(),
            n
        )));
    }
    let mut u = 0.0;
    for i in 0..n {
        let si = config[i] as f64;
        u += model.fields()[i] * si;
        for j in (i + 1)..n {
            u += model.couplings()[(i, j)] * si * config[j] as f64;
        }
    }
    Ok(u)
}

/// Fills `util[p] = U(pattern p)` for all patterns.
///
/// Block `[2^m, 2^{m+1})` is derived from block `[0, 2^m)` by flipping spin
/// `m` from `-1` to `+1`, which costs `O(N)` per state instead of `O(N^2)`.
fn utilities(model: &CouplingModel) -> Vec<f64> {
    let n = model.len();
    let total = 1usize << n;
    let j = model.couplings();
    let h = model.fields();

    let mut util = vec![0.0f64; total];
    // All-down configuration: every pair product is +1, every field term -h.
    let mut u0 = 0.0;
    for i in 0..n {
        u0 -= h[i];
        for jj in (i + 1)..n {
            u0 += j[(i, jj)];
        }
    }
    util[0] = u0;

    for m in 0..n {
        let base = 1usize << m;
        // Flip delta given the other spins of the source pattern: bits above
        // `m` are zero there, so those spins read as -1.
        let delta = |prev: usize| {
            let mut acc = h[m];
            for jj in 0..n {
                if jj != m {
                    let s = if prev >> jj & 1 == 1 { 1.0 } else { -1.0 };
                    acc += j[(m, jj)] * s;
                }
            }
            2.0 * acc
        };
        if base >= CHUNK {
            let (lower, upper) = util.split_at_mut(base);
            let lower = &lower[..base];
            upper[..base]
                .par_chunks_mut(CHUNK)
                .enumerate()
                .for_each(|(ci, chunk)| {
                    let offset = ci * CHUNK;
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        let prev = offset + k;
                        *slot = lower[prev] + delta(prev);
                    }
                });
        } else {
            for prev in 0..base {
                util[base + prev] = util[prev] + delta(prev);
            }
        }
    }
    util
}

/// Enumerates the Gibbs distribution `p(s) = exp(U(s)) / Z` with an
/// overflow-safe log-sum-exp normalization.
pub fn enumerate(model: &CouplingModel) -> CoreResult<ModelDistribution> {
    let n = model.len();
    if n > ENUMERATION_MAX_SPINS {
        return Err(CoreError::CapacityExceeded(format!(
            "exact enumeration supports at most {ENUMERATION_MAX_SPINS} spins, got {n}; \
             use the Glauber sampler for larger systems"
        )));
    }
    let mut values = utilities(model);
    let total = values.len();
    let max = par_max(total, |r| {
        r.fold(f64::NEG_INFINITY, |acc, p| acc.max(values[p]))
    });
    let sum = par_sum(total, |r| r.map(|p| (values[p] - max).exp()).sum());
    let log_partition = max + sum.ln();
    if total >= CHUNK {
        values
            .par_chunks_mut(CHUNK)
            .for_each(|chunk| chunk.iter_mut().for_each(|v| *v = (*v - log_partition).exp()));
    } else {
        values.iter_mut().for_each(|v| *v = (*v - log_partition).exp());
    }
    Ok(ModelDistribution {
        model: model.clone(),
        log_partition,
        probabilities: values,
    })
}

/// Moments of an enumerated model distribution.
pub fn model_moments(dist: &ModelDistribution) -> MomentSet {
    let n = dist.num_spins();
    let total = dist.probabilities.len();
    let probs = &dist.probabilities;

    struct Acc {
        mean: Vec<f64>,
        pair: Vec<f64>,
    }
    let acc = par_map_fold(
        total,
        |range| {
            let mut mean = vec![0.0; n];
            let mut pair = vec![0.0; n * n];
            let mut spins = [0.0f64; 32];
            for pattern in range {
                let p = probs[pattern];
                for (b, slot) in spins.iter_mut().enumerate().take(n) {
                    *slot = if pattern >> b & 1 == 1 { 1.0 } else { -1.0 };
                }
                for i in 0..n {
                    let w = p * spins[i];
                    mean[i] += w;
                    for jj in (i + 1)..n {
                        pair[i * n + jj] += w * spins[jj];
                    }
                }
            }
            Acc { mean, pair }
        },
        |mut a, b| {
            for (x, y) in a.mean.iter_mut().zip(&b.mean) {
                *x += y;
            }
            for (x, y) in a.pair.iter_mut().zip(&b.pair) {
                *x += y;
            }
            a
        },
    )
    .expect("distribution is never empty");

    let mean = DVector::from_fn(n, |i, _| acc.mean[i].clamp(-1.0, 1.0));
    let pair = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            acc.pair[a * n + b].clamp(-1.0, 1.0)
        }
    });
    MomentSet::new(mean, pair, 0).expect("enumerated moments are valid")
}

/// Shannon entropy in nats of any configuration distribution.
pub fn entropy<D: ConfigDistribution + ?Sized>(dist: &D) -> f64 {
    let mut s = 0.0;
    dist.for_each_nonzero(&mut |_, p| {
        if p > 0.0 {
            s -= p * p.ln();
        }
    });
    s
}

/// Outcome of a Kullback-Leibler divergence computation.
///
/// Divergence is infinite when the first distribution has support where the
/// second has none; that case is reported explicitly instead of as a float
/// overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlDivergence {
    Finite(f64),
    OutOfSupport,
}

impl KlDivergence {
    pub fn finite(&self) -> Option<f64> {
        match self {
            KlDivergence::Finite(v) => Some(*v),
            KlDivergence::OutOfSupport => None,
        }
    }
}

/// `D(P || Q) = sum_s P(s) ln(P(s)/Q(s))`, with `0 ln 0 = 0`.
pub fn kl_divergence<P, Q>(p: &P, q: &Q) -> CoreResult<KlDivergence>
where
    P: ConfigDistribution + ?Sized,
    Q: ConfigDistribution + ?Sized,
{
    if p.num_spins() != q.num_spins() {
        return Err(CoreError::DimensionMismatch(format!(
            "distributions over {} and {} spins",
            p.num_spins(),
            q.num_spins()
        )));
    }
    let mut out_of_support = false;
    let mut sum = 0.0;
    p.for_each_nonzero(&mut |pattern, pp| {
        if pp <= 0.0 || out_of_support {
            return;
        }
        let qp = q.probability(pattern);
        if qp <= 0.0 {
            out_of_support = true;
        } else {
            sum += pp * (pp / qp).ln();
        }
    });
    if out_of_support {
        Ok(KlDivergence::OutOfSupport)
    } else {
        Ok(KlDivergence::Finite(sum.max(0.0)))
    }
}

/// Independent-spin maximum-entropy model: `J = 0`, `h_i = atanh(q_i)`.
pub fn fit_independent(targets: &MomentSet, labels: &[String]) -> CoreResult<CouplingModel> {
    let n = targets.len();
    if labels.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "{} labels for {} moments",
            labels.len(),
            n
        )));
    }
    for i in 0..n {
        if targets.mean()[i].abs() >= 1.0 {
            return Err(CoreError::DegenerateMoments(format!(
                "mean orientation {} is saturated at {}; smooth the moments first",
                i,
                targets.mean()[i]
            )));
        }
    }
    let fields = targets.mean().map(f64::atanh);
    CouplingModel::new(labels.to_vec(), DMatrix::zeros(n, n), fields)
}

/// Options for [`fit_exact`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Largest tolerated absolute mismatch between target and model moments.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial gradient-ascent step; halved whenever the mismatch grows.
    pub step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 50_000,
            step: 0.1,
        }
    }
}

/// Result of an exact maximum-entropy fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: CouplingModel,
    pub iterations: usize,
    pub max_moment_error: f64,
    pub converged: bool,
}

/// Moment-matching fit by gradient ascent on the concave log-likelihood:
/// `Δh_i ∝ q_i^data - q_i^model`, `ΔJ_ij ∝ Q_ij^data - Q_ij^model`, with the
/// model moments recomputed by enumeration each step.
///
/// Non-convergence is reported in the returned [`FitReport`], not as an
/// error; saturated targets are an error (smooth them first).
///
/// ```
/// use maxent_market::exact::{enumerate, fit_exact, model_moments};
/// use maxent_market::sampler::make_synthetic_model;
/// use maxent_market::FitOptions;
///
/// let truth = make_synthetic_model(3, 0.3, 0.1, 1)?;
/// let targets = model_moments(&enumerate(&truth)?);
/// let report = fit_exact(&targets, truth.labels(), &FitOptions::default())?;
/// assert!(report.converged);
/// let gap = (report.model.couplings() - truth.couplings()).amax();
/// assert!(gap < 1e-4);
/// # Ok::<(), maxent_market::CoreError>(())
/// ```
pub fn fit_exact(
    targets: &MomentSet,
    labels: &[String],
    options: &FitOptions,
) -> CoreResult<FitReport> {
    let n = targets.len();
    if n > ENUMERATION_MAX_SPINS {
        return Err(CoreError::CapacityExceeded(format!(
            "exact fitting supports at most {ENUMERATION_MAX_SPINS} spins, got {n}"
        )));
    }
    if targets.is_saturated() {
        return Err(CoreError::DegenerateMoments(
            "targets contain saturated moments; apply MomentSet::smoothed first".into(),
        ));
    }
    // Independent fit is the exact optimum of the field-only problem and a
    // cheap starting point.
    let mut model = fit_independent(targets, labels)?;
    let mut step = options.step;
    let mut best_mismatch = f64::INFINITY;

    for iteration in 0..options.max_iterations {
        let moments = model_moments(&enumerate(&model)?);
        let mut mismatch = 0.0f64;
        for i in 0..n {
            mismatch = mismatch.max((targets.mean()[i] - moments.mean()[i]).abs());
            for j in (i + 1)..n {
                mismatch = mismatch.max((targets.pair()[(i, j)] - moments.pair()[(i, j)]).abs());
            }
        }
        if mismatch <= options.tolerance {
            return Ok(FitReport {
                model,
                iterations: iteration,
                max_moment_error: mismatch,
                converged: true,
            });
        }
        // Damped transients overshoot the running best by a few tens of
        // percent; only sustained growth beyond it marks an unstable step.
        if mismatch > 1.5 * best_mismatch {
            step *= 0.5;
            best_mismatch = mismatch;
        } else {
            best_mismatch = best_mismatch.min(mismatch);
        }

        let mut couplings = model.couplings().clone();
        let mut fields = model.fields().clone();
        for i in 0..n {
            fields[i] += step * (targets.mean()[i] - moments.mean()[i]);
            for j in (i + 1)..n {
                let d = step * (targets.pair()[(i, j)] - moments.pair()[(i, j)]);
                couplings[(i, j)] += d;
                couplings[(j, i)] += d;
            }
        }
        model = CouplingModel::new(labels.to_vec(), couplings, fields)?;
    }

    let moments = model_moments(&enumerate(&model)?);
    let mut mismatch = 0.0f64;
    for i in 0..n {
        mismatch = mismatch.max((targets.mean()[i] - moments.mean()[i]).abs());
        for j in (i + 1)..n {
            mismatch = mismatch.max((targets.pair()[(i, j)] - moments.pair()[(i, j)]).abs());
        }
    }
    Ok(FitReport {
        model,
        iterations: options.max_iterations,
        max_moment_error: mismatch,
        converged: false,
    })
}

/// Information-theoretic consistency summary of a pairwise model against the
/// data it was fitted to. All entropies are in nats.
#[derive(Debug, Clone)]
pub struct MultiInformation {
    /// `S(independent) - S(data)`: all correlation present in the data.
    pub total: f64,
    /// `S(independent) - S(pairwise)`: correlation captured at second order.
    pub pairwise: f64,
    /// `pairwise / total`; `None` when the data carry no correlation.
    pub ratio: Option<f64>,
    pub entropy_independent: f64,
    pub entropy_pairwise: f64,
    pub entropy_data: f64,
}

/// Threshold below which the total correlation counts as zero and the ratio
/// is undefined.
pub const MULTI_INFORMATION_FLOOR: f64 = 1e-12;

/// Compares the independent fit, the supplied pairwise model, and the
/// empirical distribution of `spins`.
pub fn multi_information(
    spins: &SpinMatrix,
    pairwise_model: &CouplingModel,
) -> CoreResult<MultiInformation> {
    if pairwise_model.len() != spins.num_assets() {
        return Err(CoreError::DimensionMismatch(format!(
            "model has {} spins, data has {} assets",
            pairwise_model.len(),
            spins.num_assets()
        )));
    }
    let moments = empirical_moments(spins).smoothed()?;
    let independent = fit_independent(&moments, spins.labels())?;
    let entropy_independent = entropy(&enumerate(&independent)?);
    let entropy_pairwise = entropy(&enumerate(pairwise_model)?);
    let entropy_data = entropy(&empirical_distribution(spins)?);
    let total = entropy_independent - entropy_data;
    let pairwise = entropy_independent - entropy_pairwise;
    let ratio = if total.abs() < MULTI_INFORMATION_FLOOR {
        None
    } else {
        Some(pairwise / total)
    };
    Ok(MultiInformation {
        total,
        pairwise,
        ratio,
        entropy_independent,
        entropy_pairwise,
        entropy_data,
    })
}

/// Convenience: probability-weighted moment set of the enumerated model,
/// exposed for oracle-style checks.
pub fn distribution_moments<D: ConfigDistribution + ?Sized>(dist: &D) -> MomentSet {
    moments_of_distribution(dist)
}

/// Reconstructs a configuration's spins; helper for tests and diagnostics.
pub fn pattern_spins(pattern: u32, n: usize) -> Vec<i8> {
    decode_pattern(pattern, n)
}
