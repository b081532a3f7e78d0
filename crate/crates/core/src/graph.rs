//! Interaction-weighted graphs: distances from couplings, minimum spanning
//! trees, tree-length series, degree statistics, and power-law fits.

use crate::error::{CoreError, CoreResult};
use crate::exact::CouplingModel;
use crate::inverse::{invert, InversionOptions};
use crate::spin::{sliding_windows, SpinMatrix, WindowSpec};
use crate::analytics::{SeriesKind, TimeSeriesReport};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Complete graph on assets with symmetric nonnegative distances.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    labels: Vec<String>,
    dist: DMatrix<f64>,
}

impl WeightedGraph {
    pub fn new(labels: Vec<String>, dist: DMatrix<f64>) -> CoreResult<Self> {
        let n = dist.nrows();
        if dist.ncols() != n || labels.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "distance matrix {}x{} with {} labels",
                dist.nrows(),
                dist.ncols(),
                labels.len()
            )));
        }
        if n < 2 {
            return Err(CoreError::InvalidInput(
                "a weighted graph needs at least two vertices".into(),
            ));
        }
        for i in 0..n {
            if dist[(i, i)] != 0.0 {
                return Err(CoreError::InvalidInput(format!(
                    "distance diagonal must be zero at {i}"
                )));
            }
            for j in 0..n {
                let d = dist[(i, j)];
                if !d.is_finite() || d < 0.0 {
                    return Err(CoreError::InvalidInput(format!(
                        "distance ({i}, {j}) must be finite and nonnegative, got {d}"
                    )));
                }
                if (dist[(i, j)] - dist[(j, i)]).abs() > 1e-12 {
                    return Err(CoreError::InvalidInput(format!(
                        "distances not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { labels, dist })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dist(&self) -> &DMatrix<f64> {
        &self.dist
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One spanning-tree edge, endpoints ordered `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// A spanning tree and its total length.
#[derive(Debug, Clone)]
pub struct Tree {
    labels: Vec<String>,
    edges: Vec<TreeEdge>,
    length: f64,
}

impl Tree {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }
}

/// Distances from interaction strengths: couplings are normalized by the
/// largest off-diagonal magnitude and mapped through `sqrt(2 (1 - x))`, so
/// the strongest pair touches and an opposite-sign extreme sits at 2.
pub fn coupling_to_distance(model: &CouplingModel) -> CoreResult<WeightedGraph> {
    let n = model.len();
    if n < 2 {
        return Err(CoreError::InvalidInput(
            "need at least two assets to build a graph".into(),
        ));
    }
    let j = model.couplings();
    let mut max_abs = 0.0f64;
    for i in 0..n {
        for k in (i + 1)..n {
            max_abs = max_abs.max(j[(i, k)].abs());
        }
    }
    if max_abs == 0.0 {
        return Err(CoreError::DegenerateGraph(
            "all off-diagonal couplings are zero; distances are undefined".into(),
        ));
    }
    let dist = DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            0.0
        } else {
            let normalized = j[(i, k)] / max_abs;
            (2.0 * (1.0 - normalized)).max(0.0).sqrt()
        }
    });
    WeightedGraph::new(model.labels().to_vec(), dist)
}

/// Kruskal's minimum spanning tree with deterministic lexicographic
/// tie-breaking on `(weight, i, j)`.
pub fn minimum_spanning_tree(graph: &WeightedGraph) -> Tree {
    let n = graph.len();
    let mut edges: Vec<TreeEdge> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push(TreeEdge {
                a: i,
                b: j,
                weight: graph.dist[(i, j)],
            });
        }
    }
    edges.sort_by(|x, y| {
        x.weight
            .partial_cmp(&y.weight)
            .expect("distances are finite")
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    let mut picked = Vec::with_capacity(n - 1);
    let mut length = 0.0;
    for edge in edges {
        let ra = find(&mut parent, edge.a);
        let rb = find(&mut parent, edge.b);
        if ra != rb {
            parent[ra] = rb;
            length += edge.weight;
            picked.push(edge);
            if picked.len() == n - 1 {
                break;
            }
        }
    }
    Tree {
        labels: graph.labels.clone(),
        edges: picked,
        length,
    }
}

/// Per-window minimum-spanning-tree length, emitted as the relative
/// deviation from the across-window mean length.
pub fn mst_length_series(
    spins: &SpinMatrix,
    spec: &WindowSpec,
    options: &InversionOptions,
) -> CoreResult<TimeSeriesReport> {
    let windows = sliding_windows(spins, spec)?;
    let lengths: Vec<Option<f64>> = windows
        .par_iter()
        .map(|w| {
            let report = invert(w, options).ok()?;
            let graph = coupling_to_distance(&report.model).ok()?;
            let tree = minimum_spanning_tree(&graph);
            tree.length().is_finite().then(|| tree.length())
        })
        .collect();
    let present: Vec<f64> = lengths.iter().filter_map(|v| *v).collect();
    let mean = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    let values: Vec<Option<f64>> = lengths
        .iter()
        .map(|v| {
            v.map(|length| {
                if mean == 0.0 {
                    0.0
                } else {
                    (length - mean) / mean
                }
            })
        })
        .collect();
    let starts = spec.starts(spins.num_days());
    let start_dates = spins
        .dates()
        .map(|d| starts.iter().map(|&s| d[s].clone()).collect());
    Ok(TimeSeriesReport {
        kind: SeriesKind::MstLengthDeviation,
        spec: *spec,
        window_starts: starts,
        start_dates,
        values,
        degenerate_normalization: false,
    })
}

/// Vertex count per degree. The frequencies sum to `N` and the
/// degree-weighted sum is `2 (N - 1)`.
pub fn degree_distribution(tree: &Tree) -> BTreeMap<usize, usize> {
    let mut degree = vec![0usize; tree.num_vertices()];
    for e in tree.edges() {
        degree[e.a] += 1;
        degree[e.b] += 1;
    }
    let mut freq = BTreeMap::new();
    for d in degree {
        *freq.entry(d).or_insert(0) += 1;
    }
    freq
}

/// Least-squares power-law fit of `ln f(n)` against `ln n`.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawFit {
    /// Exponent estimate (negated slope).
    pub alpha: f64,
    pub alpha_std_err: f64,
    /// Coefficient of determination of the log-log regression.
    pub r2: f64,
    pub points_used: usize,
}

/// Fits `f(n) ~ n^{-alpha}` over the degrees with nonzero frequency.
pub fn fit_power_law(freqs: &BTreeMap<usize, usize>) -> CoreResult<PowerLawFit> {
    let points: Vec<(f64, f64)> = freqs
        .iter()
        .filter(|&(&d, &f)| d > 0 && f > 0)
        .map(|(&d, &f)| ((d as f64).ln(), (f as f64).ln()))
        .collect();
    let k = points.len();
    if k < 2 {
        return Err(CoreError::InsufficientData(format!(
            "power-law fit needs at least 2 degrees with nonzero frequency, got {k}"
        )));
    }
    let n = k as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(CoreError::InsufficientData(
            "all degrees coincide; the exponent is undetermined".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let sst: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if sst == 0.0 {
        1.0
    } else {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    };
    let alpha_std_err = if k > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(PowerLawFit {
        alpha: -slope,
        alpha_std_err,
        r2,
        points_used: k,
    })
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT rendering of a tree with labeled vertices and edge weights;
/// deterministic ordering.
pub fn tree_to_dot(tree: &Tree) -> String {
    let mut out = String::from("graph interaction_mst {\n");
    for label in tree.labels() {
        out.push_str(&format!("  \"{}\";\n", escape_dot(label)));
    }
    let mut edges = tree.edges().to_vec();
    edges.sort_by(|x, y| x.a.cmp(&y.a).then(x.b.cmp(&y.b)));
    for e in &edges {
        out.push_str(&format!(
            "  \"{}\" -- \"{}\" [weight={}, label=\"{}\"];\n",
            escape_dot(&tree.labels()[e.a]),
            escape_dot(&tree.labels()[e.b]),
            e.weight,
            e.weight
        ));
    }
    out.push_str("}\n");
    out
}
