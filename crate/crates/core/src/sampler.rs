//! Glauber-dynamics Markov-chain Monte Carlo.
//!
//! Heat-bath updates: a uniformly random site is resampled from its
//! conditional given the rest, so the Gibbs distribution is stationary and
//! detailed balance holds exactly. One sweep is `N` single-site attempts.
//! Chains are driven by a counter-based generator (ChaCha12) seeded
//! explicitly; identical seeds give bit-identical output.

use crate::error::CoreResult;
use crate::exact::CouplingModel;
use crate::moments::MomentSet;
use crate::spin::SpinMatrix;
use crate::util::sigmoid;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Name of the pseudo-random generator, pinned into output metadata.
pub const GENERATOR_NAME: &str = "chacha12";

/// Chain schedule. Sweep counts are in units of `N` single-spin attempts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub seed: u64,
    /// Sweeps discarded before any measurement.
    pub equilibration_sweeps: usize,
    /// Sweeps spent measuring.
    pub measure_sweeps: usize,
    /// Sweeps between retained samples (at least 1).
    pub thinning: usize,
}

impl ChainConfig {
    /// Defaults scaled to the system size: 1e4 equilibration sweeps, 2e5
    /// measurement sweeps, thinning of `n` sweeps.
    pub fn default_for(n: usize, seed: u64) -> Self {
        Self {
            seed,
            equilibration_sweeps: 10_000,
            measure_sweeps: 200_000,
            thinning: n.max(1),
        }
    }

    fn validated(&self) -> ChainConfig {
        ChainConfig {
            thinning: self.thinning.max(1),
            ..*self
        }
    }
}

/// Moment estimates from one chain.
#[derive(Debug, Clone)]
pub struct SampleSummary {
    pub moments: MomentSet,
    pub retained_samples: usize,
    /// Fraction of attempts that changed the spin value.
    pub acceptance_rate: f64,
}

/// One heat-bath update at a uniformly random site. Returns `true` when the
/// spin value changed.
///
/// The new value is `+1` with probability `1 / (1 + exp(-2 L_i))` where
/// `L_i = h_i + sum_{j != i} J_ij s_j`, independent of the previous value.
pub fn glauber_step<R: Rng>(model: &CouplingModel, state: &mut [i8], rng: &mut R) -> bool {
    debug_assert_eq!(state.len(), model.len());
    let site = rng.random_range(0..model.len());
    let local = model.local_field(site, state);
    let up = rng.random::<f64>() < sigmoid(2.0 * local);
    let new = if up { 1i8 } else { -1i8 };
    let changed = state[site] != new;
    state[site] = new;
    changed
}

fn random_state<R: Rng>(n: usize, rng: &mut R) -> Vec<i8> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1i8 } else { -1i8 })
        .collect()
}

fn sweep<R: Rng>(model: &CouplingModel, state: &mut [i8], rng: &mut R) -> usize {
    let mut changed = 0;
    for _ in 0..model.len() {
        if glauber_step(model, state, rng) {
            changed += 1;
        }
    }
    changed
}

/// Runs equilibration then measurement, accumulating first and second
/// moments from retained samples. Deterministic given the seed.
pub fn sample_moments(model: &CouplingModel, config: &ChainConfig) -> SampleSummary {
    let config = config.validated();
    let n = model.len();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut state = random_state(n, &mut rng);
    for _ in 0..config.equilibration_sweeps {
        sweep(model, &mut state, &mut rng);
    }

    let retained = config.measure_sweeps / config.thinning;
    let mut mean_acc = vec![0i64; n];
    let mut pair_acc = vec![0i64; n * n];
    let mut changed = 0usize;
    let mut attempts = 0usize;
    for _ in 0..retained {
        for _ in 0..config.thinning {
            changed += sweep(model, &mut state, &mut rng);
            attempts += n;
        }
        for i in 0..n {
            mean_acc[i] += state[i] as i64;
            for j in i..n {
                pair_acc[i * n + j] += (state[i] as i64) * (state[j] as i64);
            }
        }
    }

    let denom = retained.max(1) as f64;
    let mean = DVector::from_fn(n, |i, _| mean_acc[i] as f64 / denom);
    let pair = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            pair_acc[a * n + b] as f64 / denom
        }
    });
    SampleSummary {
        moments: MomentSet::new(mean, pair, retained).expect("sampled moments are valid"),
        retained_samples: retained,
        acceptance_rate: if attempts == 0 {
            0.0
        } else {
            changed as f64 / attempts as f64
        },
    }
}

/// Draws `count` configurations separated by `thinning` sweeps after
/// equilibration; suitable as synthetic ground-truth data.
pub fn sample_configurations(
    model: &CouplingModel,
    config: &ChainConfig,
    count: usize,
) -> CoreResult<SpinMatrix> {
    let config = config.validated();
    let n = model.len();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut state = random_state(n, &mut rng);
    for _ in 0..config.equilibration_sweeps {
        sweep(model, &mut state, &mut rng);
    }
    let mut rows = DMatrix::zeros(count, n);
    for r in 0..count {
        for _ in 0..config.thinning {
            sweep(model, &mut state, &mut rng);
        }
        for c in 0..n {
            rows[(r, c)] = state[c];
        }
    }
    SpinMatrix::new(model.labels().to_vec(), rows, None)
}

/// Random ground-truth model: couplings uniform on `[0, coupling_scale]`
/// (symmetric, zero diagonal), fields uniform on
/// `[-field_scale, field_scale]`. Deterministic given the seed.
pub fn make_synthetic_model(
    n: usize,
    coupling_scale: f64,
    field_scale: f64,
    seed: u64,
) -> CoreResult<CouplingModel> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut couplings = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random::<f64>() * coupling_scale;
            couplings[(i, j)] = v;
            couplings[(j, i)] = v;
        }
    }
    let fields = DVector::from_fn(n, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * field_scale);
    CouplingModel::new((0..n).map(|i| format!("a{i}")).collect(), couplings, fields)
}
