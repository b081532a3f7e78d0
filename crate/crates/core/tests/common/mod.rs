//! Shared fixtures for the integration suites: regime-switch synthetic
//! datasets and a brute-force spanning-tree oracle.
//!
//! Each test binary compiles this module separately and uses a subset.
#![allow(dead_code)]

use maxent_market::exact::CouplingModel;
use maxent_market::graph::WeightedGraph;
use maxent_market::sampler::{sample_configurations, ChainConfig};
use maxent_market::spin::SpinMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub const REGIME_ASSETS: usize = 6;
pub const REGIME_SEGMENT_DAYS: usize = 300;
pub const REGIME_SEGMENTS: usize = 6;

/// Uniform ferromagnetic model: every pair coupled at `strength`, no fields.
pub fn uniform_coupling_model(n: usize, strength: f64) -> CouplingModel {
    let mut couplings = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                couplings[(i, j)] = strength;
            }
        }
    }
    CouplingModel::new(
        (0..n).map(|i| format!("a{i}")).collect(),
        couplings,
        DVector::zeros(n),
    )
    .unwrap()
}

/// Alternating 300-day segments: ordered (strong uniform couplings, Glauber
/// sampled) then disordered (free spins), three of each. Segment `k` is
/// ordered when `k` is even.
pub fn regime_switch_dataset(seed: u64) -> SpinMatrix {
    let n = REGIME_ASSETS;
    let ordered_model = uniform_coupling_model(n, 0.6);
    let free_model = CouplingModel::zeros((0..n).map(|i| format!("a{i}")).collect());
    let mut rows: Vec<Vec<i8>> = Vec::new();
    for segment in 0..REGIME_SEGMENTS {
        let model = if segment % 2 == 0 {
            &ordered_model
        } else {
            &free_model
        };
        let chain = ChainConfig {
            seed: seed + segment as u64,
            equilibration_sweeps: 500,
            measure_sweeps: 0,
            thinning: 2,
        };
        let block = sample_configurations(model, &chain, REGIME_SEGMENT_DAYS).unwrap();
        for r in 0..block.num_days() {
            rows.push((0..n).map(|c| block.spins()[(r, c)]).collect());
        }
    }
    SpinMatrix::from_rows((0..n).map(|i| format!("a{i}")).collect(), &rows).unwrap()
}

/// True when the window `[start, start + width)` lies inside an ordered
/// segment of the regime dataset.
pub fn window_in_ordered_segment(start: usize, width: usize) -> Option<bool> {
    let segment = start / REGIME_SEGMENT_DAYS;
    let end = start + width;
    if end <= (segment + 1) * REGIME_SEGMENT_DAYS {
        Some(segment % 2 == 0)
    } else {
        None // straddles a boundary
    }
}

/// Complete graph with uniform random distances in `(0.05, 2.0)`.
pub fn random_complete_graph(n: usize, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut dist = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = 0.05 + 1.95 * rng.random::<f64>();
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    WeightedGraph::new((0..n).map(|i| format!("v{i}")).collect(), dist).unwrap()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn local_field(model: &CouplingModel, site: usize, state: &[i8]) -> f64 {
    let mut acc = model.fields()[site];
    for j in 0..model.len() {
        if j != site {
            acc += model.couplings()[(site, j)] * state[j] as f64;
        }
    }
    acc
}

pub fn pattern_state(pattern: u32, n: usize) -> Vec<i8> {
    (0..n)
        .map(|b| if pattern >> b & 1 == 1 { 1 } else { -1 })
        .collect()
}

fn pruefer_tree_length(seq: &[usize], dist: &DMatrix<f64>) -> f64 {
    let n = seq.len() + 2;
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut total = 0.0;
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).expect("a leaf always exists");
        total += dist[(leaf, v)];
        degree[leaf] = 0;
        degree[v] -= 1;
    }
    let mut remaining = (0..n).filter(|&u| degree[u] == 1);
    let a = remaining.next().unwrap();
    let b = remaining.next().unwrap();
    total + dist[(a, b)]
}

/// Minimum spanning-tree length by exhaustive enumeration of all `n^(n-2)`
/// labeled trees via their Pruefer sequences. Only sensible for small `n`.
pub fn brute_force_mst_length(graph: &WeightedGraph) -> f64 {
    let n = graph.len();
    assert!((2..=7).contains(&n), "brute force limited to tiny graphs");
    if n == 2 {
        return graph.dist()[(0, 1)];
    }
    let seq_len = n - 2;
    let total: usize = n.pow(seq_len as u32);
    let mut best = f64::INFINITY;
    let mut seq = vec![0usize; seq_len];
    for code in 0..total {
        let mut c = code;
        for slot in seq.iter_mut() {
            *slot = c % n;
            c /= n;
        }
        best = best.min(pruefer_tree_length(&seq, graph.dist()));
    }
    best
}
