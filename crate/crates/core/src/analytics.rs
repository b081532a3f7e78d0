//! Sliding-window diagnostics of market state: net orientation, mean-field
//! entropy, aggregate preference, and interaction-trace series.
//!
//! Windows that fail to invert produce explicit gaps (`None` values) rather
//! than aborting the series; smoothing and normalization skip gaps.

use crate::error::{CoreError, CoreResult};
use crate::inverse::{invert, InversionOptions};
use crate::spin::{sliding_windows, SpinMatrix, WindowSpec};
use rayon::prelude::*;

/// What a windowed series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    NetOrientation,
    MfEntropy,
    AggregatePreference,
    TraceDeviation,
    MstLengthDeviation,
}

impl SeriesKind {
    pub fn name(&self) -> &'static str {
        match self {
            SeriesKind::NetOrientation => "netOrientation",
            SeriesKind::MfEntropy => "mfEntropy",
            SeriesKind::AggregatePreference => "aggregatePreference",
            SeriesKind::TraceDeviation => "traceDeviation",
            SeriesKind::MstLengthDeviation => "mstLengthDeviation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "netOrientation" => Some(Self::NetOrientation),
            "mfEntropy" => Some(Self::MfEntropy),
            "aggregatePreference" => Some(Self::AggregatePreference),
            "traceDeviation" => Some(Self::TraceDeviation),
            "mstLengthDeviation" => Some(Self::MstLengthDeviation),
            _ => None,
        }
    }
}

/// One value per complete window; `None` marks a window whose computation
/// failed (downstream consumers must not interpolate silently).
#[derive(Debug, Clone)]
pub struct TimeSeriesReport {
    pub kind: SeriesKind,
    pub spec: WindowSpec,
    /// Starting row of each window.
    pub window_starts: Vec<usize>,
    /// Starting date of each window when the input carries dates.
    pub start_dates: Option<Vec<String>>,
    pub values: Vec<Option<f64>>,
    /// Set when normalization met a zero-variance series and zeroed it.
    pub degenerate_normalization: bool,
}

impl TimeSeriesReport {
    fn from_windows(
        kind: SeriesKind,
        spec: WindowSpec,
        spins: &SpinMatrix,
        values: Vec<Option<f64>>,
    ) -> Self {
        let starts = spec.starts(spins.num_days());
        let start_dates = spins
            .dates()
            .map(|d| starts.iter().map(|&s| d[s].clone()).collect());
        TimeSeriesReport {
            kind,
            spec,
            window_starts: starts,
            start_dates,
            values,
            degenerate_normalization: false,
        }
    }

    /// Values that are present, in order.
    pub fn present(&self) -> Vec<f64> {
        self.values.iter().filter_map(|v| *v).collect()
    }
}

/// Per-asset mean orientations over a window.
fn window_means(window: &SpinMatrix) -> Vec<f64> {
    let t = window.num_days() as f64;
    (0..window.num_assets())
        .map(|i| {
            let sum: i64 = window.spins().column(i).iter().map(|&s| s as i64).sum();
            sum as f64 / t
        })
        .collect()
}

/// Binary entropy term of one mean orientation, in nats, with `0 ln 0 = 0`.
fn binary_entropy(q: f64) -> f64 {
    let mut s = 0.0;
    for p in [(1.0 + q) / 2.0, (1.0 - q) / 2.0] {
        if p > 0.0 {
            s -= p * p.ln();
        }
    }
    s
}

/// Mean-field entropy of a set of mean orientations.
pub fn mean_field_entropy(means: &[f64]) -> f64 {
    means.iter().map(|&q| binary_entropy(q)).sum()
}

/// Mean of all `N x width` spins per window; values in `[-1, 1]`.
pub fn net_orientation_series(
    spins: &SpinMatrix,
    spec: &WindowSpec,
) -> CoreResult<TimeSeriesReport> {
    let windows = sliding_windows(spins, spec)?;
    let values = windows
        .iter()
        .map(|w| {
            let total: i64 = w.spins().iter().map(|&s| s as i64).sum();
            Some(total as f64 / (w.num_days() * w.num_assets()) as f64)
        })
        .collect();
    Ok(TimeSeriesReport::from_windows(
        SeriesKind::NetOrientation,
        *spec,
        spins,
        values,
    ))
}

/// Mean-field entropy per window, in `[0, N ln 2]`.
pub fn mf_entropy_series(spins: &SpinMatrix, spec: &WindowSpec) -> CoreResult<TimeSeriesReport> {
    let windows = sliding_windows(spins, spec)?;
    let values = windows
        .iter()
        .map(|w| Some(mean_field_entropy(&window_means(w))))
        .collect();
    Ok(TimeSeriesReport::from_windows(
        SeriesKind::MfEntropy,
        *spec,
        spins,
        values,
    ))
}

/// Sum of fitted external fields per window (default method: rPLM).
/// Windows whose inversion fails or does not converge become gaps.
pub fn aggregate_preference_series(
    spins: &SpinMatrix,
    spec: &WindowSpec,
    options: &InversionOptions,
) -> CoreResult<TimeSeriesReport> {
    let windows = sliding_windows(spins, spec)?;
    let values: Vec<Option<f64>> = windows
        .par_iter()
        .map(|w| match invert(w, options) {
            Ok(report) if report.converged => {
                let sum = report.model.fields().sum();
                sum.is_finite().then_some(sum)
            }
            _ => None,
        })
        .collect();
    Ok(TimeSeriesReport::from_windows(
        SeriesKind::AggregatePreference,
        *spec,
        spins,
        values,
    ))
}

/// Trace of the third-order-fitted interaction matrix per window, minus the
/// across-window mean, so the series sums to zero by construction.
pub fn trace_deviation_series(
    spins: &SpinMatrix,
    spec: &WindowSpec,
) -> CoreResult<TimeSeriesReport> {
    let windows = sliding_windows(spins, spec)?;
    let options = InversionOptions::new(crate::inverse::InversionMethod::Tanaka);
    let traces: Vec<Option<f64>> = windows
        .par_iter()
        .map(|w| match invert(w, &options) {
            Ok(report) => {
                let trace = report.model.couplings().trace();
                trace.is_finite().then_some(trace)
            }
            Err(_) => None,
        })
        .collect();
    let present: Vec<f64> = traces.iter().filter_map(|v| *v).collect();
    let mean = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    let values = traces.iter().map(|v| v.map(|t| t - mean)).collect();
    Ok(TimeSeriesReport::from_windows(
        SeriesKind::TraceDeviation,
        *spec,
        spins,
        values,
    ))
}

/// Centered moving average with window `2 * half_width + 1`, clipped at the
/// series boundaries; gaps are skipped and preserved.
pub fn smooth_series(report: &TimeSeriesReport, half_width: usize) -> TimeSeriesReport {
    let len = report.values.len();
    let values = (0..len)
        .map(|i| {
            report.values[i]?;
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width).min(len.saturating_sub(1));
            let window: Vec<f64> = (lo..=hi).filter_map(|k| report.values[k]).collect();
            if window.is_empty() {
                None
            } else {
                Some(window.iter().sum::<f64>() / window.len() as f64)
            }
        })
        .collect();
    TimeSeriesReport {
        values,
        ..report.clone()
    }
}

/// Subtracts the mean and divides by the population standard deviation of
/// the present values; a zero-variance series becomes all zeros and the
/// report is flagged.
pub fn normalize_series(report: &TimeSeriesReport) -> CoreResult<TimeSeriesReport> {
    let present = report.present();
    if present.is_empty() {
        return Err(CoreError::InsufficientData(
            "cannot normalize a series with no values".into(),
        ));
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let variance = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = variance.sqrt();
    let degenerate = sd == 0.0;
    let values = report
        .values
        .iter()
        .map(|v| v.map(|x| if degenerate { 0.0 } else { (x - mean) / sd }))
        .collect();
    Ok(TimeSeriesReport {
        values,
        degenerate_normalization: degenerate,
        ..report.clone()
    })
}

/// Histogram of per-day net orientations pooled over non-overlapping
/// windows.
#[derive(Debug, Clone)]
pub struct OrientationHistogram {
    /// Strictly increasing edges spanning `[-1, 1]`.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Number of modes of the smoothed counts (strict local maxima holding
    /// at least 5% of the mass; boundary bins compare against zero).
    pub mode_count: usize,
}

/// Fraction of total mass a smoothed peak needs to count as a mode.
const MODE_MASS_FLOOR: f64 = 0.05;

/// Pools the per-day orientations (asset average per day) of every complete
/// window into one histogram. Requires `shift == width` so no day is
/// counted twice.
pub fn orientation_histogram(
    spins: &SpinMatrix,
    spec: &WindowSpec,
    bin_width: f64,
) -> CoreResult<OrientationHistogram> {
    if spec.shift != spec.width {
        return Err(CoreError::InvalidInput(format!(
            "orientation histograms need non-overlapping windows \
             (shift {} != width {})",
            spec.shift, spec.width
        )));
    }
    if !(bin_width > 0.0 && bin_width <= 2.0) {
        return Err(CoreError::InvalidInput(format!(
            "bin width must lie in (0, 2], got {bin_width}"
        )));
    }
    let windows = sliding_windows(spins, spec)?;
    let ratio = 2.0 / bin_width;
    let bins = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    }
    .max(1);
    let mut edges: Vec<f64> = (0..bins).map(|k| -1.0 + k as f64 * bin_width).collect();
    edges.push(1.0);

    let mut counts = vec![0usize; bins];
    let n = spins.num_assets() as f64;
    for w in &windows {
        for day in 0..w.num_days() {
            let total: i64 = w.spins().row(day).iter().map(|&s| s as i64).sum();
            let x = total as f64 / n;
            let idx = (((x + 1.0) / bin_width).floor() as isize).clamp(0, bins as isize - 1);
            counts[idx as usize] += 1;
        }
    }
    let mode_count = count_modes(&counts);
    Ok(OrientationHistogram {
        bin_edges: edges,
        counts,
        mode_count,
    })
}

/// Modes of a count vector: smooth with a 3-bin moving average (clipped at
/// the ends), then count runs of equal value that strictly dominate both
/// neighbors (the outside counts as zero) and reach the mass floor.
fn count_modes(counts: &[usize]) -> usize {
    let b = counts.len();
    if b == 0 {
        return 0;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0;
    }
    let smoothed: Vec<f64> = (0..b)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(b - 1);
            (lo..=hi).map(|k| counts[k] as f64).sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let floor = MODE_MASS_FLOOR * total as f64;
    let at = |i: isize| -> f64 {
        if i < 0 || i >= b as isize {
            0.0
        } else {
            smoothed[i as usize]
        }
    };
    let mut modes = 0;
    let mut i = 0isize;
    while i < b as isize {
        let mut j = i;
        while j + 1 < b as isize && at(j + 1) == at(i) {
            j += 1;
        }
        let value = at(i);
        if value > at(i - 1) && value > at(j + 1) && value >= floor {
            modes += 1;
        }
        i = j + 1;
    }
    modes
}
