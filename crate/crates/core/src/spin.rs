//! Daily price records and their binarized spin representation.
//!
//! A trading day maps each asset to an orientation: `+1` when the close is
//! strictly above the open, `-1` otherwise. All types here are immutable
//! after construction and validated up front.

use crate::error::{CoreError, CoreResult};
use nalgebra::DMatrix;

/// Open/close price record for `N` assets over `T` trading days.
#[derive(Debug, Clone)]
pub struct PriceSeries {
    labels: Vec<String>,
    dates: Vec<String>,
    open: DMatrix<f64>,
    close: DMatrix<f64>,
}

impl PriceSeries {
    /// Validates shapes, label uniqueness, strictly increasing dates, and
    /// strictly positive finite prices.
    pub fn new(
        labels: Vec<String>,
        dates: Vec<String>,
        open: DMatrix<f64>,
        close: DMatrix<f64>,
    ) -> CoreResult<Self> {
        let t = open.nrows();
        let n = open.ncols();
        if close.nrows() != t || close.ncols() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "open is {}x{} but close is {}x{}",
                t,
                n,
                close.nrows(),
                close.ncols()
            )));
        }
        if labels.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "{} labels for {} price columns",
                labels.len(),
                n
            )));
        }
        if dates.len() != t {
            return Err(CoreError::DimensionMismatch(format!(
                "{} dates for {} price rows",
                dates.len(),
                t
            )));
        }
        if t == 0 || n == 0 {
            return Err(CoreError::InvalidInput(
                "price series must have at least one day and one asset".into(),
            ));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(CoreError::InvalidInput(format!(
                    "dates must be strictly increasing: {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(CoreError::InvalidInput("labels must be unique".into()));
        }
        for row in 0..t {
            for col in 0..n {
                for (name, m) in [("open", &open), ("close", &close)] {
                    let v = m[(row, col)];
                    if !v.is_finite() || v <= 0.0 {
                        return Err(CoreError::InvalidPrice {
                            row,
                            column: col,
                            date: dates[row].clone(),
                            label: labels[col].clone(),
                            message: format!("{name} price {v} is not finite and positive"),
                        });
                    }
                }
            }
        }
        Ok(Self {
            labels,
            dates,
            open,
            close,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn open(&self) -> &DMatrix<f64> {
        &self.open
    }

    pub fn close(&self) -> &DMatrix<f64> {
        &self.close
    }

    pub fn num_days(&self) -> usize {
        self.open.nrows()
    }

    pub fn num_assets(&self) -> usize {
        self.open.ncols()
    }
}

/// A `T x N` matrix of daily orientations, every entry exactly `-1` or `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinMatrix {
    labels: Vec<String>,
    dates: Option<Vec<String>>,
    spins: DMatrix<i8>,
}

impl SpinMatrix {
    pub fn new(
        labels: Vec<String>,
        spins: DMatrix<i8>,
        dates: Option<Vec<String>>,
    ) -> CoreResult<Self> {
        let t = spins.nrows();
        let n = spins.ncols();
        if t == 0 || n == 0 {
            return Err(CoreError::InvalidInput(
                "spin matrix must have at least one day and one asset".into(),
            ));
        }
        if labels.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "{} labels for {} spin columns",
                labels.len(),
                n
            )));
        }
        if let Some(d) = &dates {
            if d.len() != t {
                return Err(CoreError::DimensionMismatch(format!(
                    "{} dates for {} spin rows",
                    d.len(),
                    t
                )));
            }
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(CoreError::InvalidInput(format!(
                "spin entries must be -1 or +1, found {bad}"
            )));
        }
        Ok(Self {
            labels,
            dates,
            spins,
        })
    }

    /// Builds a matrix from rows of `-1`/`+1` values.
    pub fn from_rows(labels: Vec<String>, rows: &[Vec<i8>]) -> CoreResult<Self> {
        if rows.is_empty() {
            return Err(CoreError::InvalidInput("no spin rows".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(CoreError::DimensionMismatch(
                "spin rows have unequal lengths".into(),
            ));
        }
        let m = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
        Self::new(labels, m, None)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    pub fn spins(&self) -> &DMatrix<i8> {
        &self.spins
    }

    pub fn num_days(&self) -> usize {
        self.spins.nrows()
    }

    pub fn num_assets(&self) -> usize {
        self.spins.ncols()
    }

    /// Owned copy of `width` consecutive rows starting at `start`.
    pub fn window(&self, start: usize, width: usize) -> CoreResult<SpinMatrix> {
        if start + width > self.num_days() || width == 0 {
            return Err(CoreError::InvalidInput(format!(
                "window [{start}, {}) out of range for {} days",
                start + width,
                self.num_days()
            )));
        }
        Ok(SpinMatrix {
            labels: self.labels.clone(),
            dates: self
                .dates
                .as_ref()
                .map(|d| d[start..start + width].to_vec()),
            spins: self.spins.rows(start, width).into_owned(),
        })
    }
}

/// Sliding-window geometry: `width` consecutive days, starts `shift` apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub width: usize,
    pub shift: usize,
}

impl WindowSpec {
    pub fn new(width: usize, shift: usize) -> CoreResult<Self> {
        if width == 0 || shift == 0 {
            return Err(CoreError::InvalidInput(
                "window width and shift must be at least 1".into(),
            ));
        }
        Ok(Self { width, shift })
    }

    /// Number of complete windows in a series of `t` days.
    pub fn count(&self, t: usize) -> usize {
        if self.width > t {
            0
        } else {
            (t - self.width) / self.shift + 1
        }
    }

    /// Starting rows of the complete windows.
    pub fn starts(&self, t: usize) -> Vec<usize> {
        (0..self.count(t)).map(|k| k * self.shift).collect()
    }
}

/// Maps prices to orientations: `+1` when close > open, `-1` otherwise
/// (ties count as down).
///
/// ```
/// use maxent_market::spin::{binarize, PriceSeries};
/// use nalgebra::DMatrix;
///
/// let prices = PriceSeries::new(
///     vec!["AEX".into()],
///     vec!["2020-01-01".into(), "2020-01-02".into()],
///     DMatrix::from_column_slice(2, 1, &[100.0, 100.0]),
///     DMatrix::from_column_slice(2, 1, &[101.0, 100.0]),
/// )?;
/// let spins = binarize(&prices)?;
/// assert_eq!(spins.spins()[(0, 0)], 1);  // rose
/// assert_eq!(spins.spins()[(1, 0)], -1); // tie counts as down
/// # Ok::<(), maxent_market::CoreError>(())
/// ```
pub fn binarize(prices: &PriceSeries) -> CoreResult<SpinMatrix> {
    let t = prices.num_days();
    let n = prices.num_assets();
    let spins = DMatrix::from_fn(t, n, |row, col| {
        if prices.close()[(row, col)] > prices.open()[(row, col)] {
            1i8
        } else {
            -1i8
        }
    });
    SpinMatrix::new(
        prices.labels().to_vec(),
        spins,
        Some(prices.dates().to_vec()),
    )
}

/// All complete windows of `spec` over `spins`, in start order.
///
/// Errors when the width exceeds the series length, so an empty result can
/// never pass silently.
pub fn sliding_windows(spins: &SpinMatrix, spec: &WindowSpec) -> CoreResult<Vec<SpinMatrix>> {
    if spec.width > spins.num_days() {
        return Err(CoreError::InvalidInput(format!(
            "window width {} exceeds series length {}",
            spec.width,
            spins.num_days()
        )));
    }
    spec.starts(spins.num_days())
        .into_iter()
        .map(|s| spins.window(s, spec.width))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(open: &[f64], close: &[f64]) -> PriceSeries {
        let t = open.len();
        PriceSeries::new(
            vec!["X".into()],
            (0..t).map(|i| format!("2020-01-{:02}", i + 1)).collect(),
            DMatrix::from_column_slice(t, 1, open),
            DMatrix::from_column_slice(t, 1, close),
        )
        .unwrap()
    }

    #[test]
    fn binarize_rise_tie_fall() {
        let s = series(&[100.0, 100.0, 100.0], &[101.0, 100.0, 99.0]);
        let spins = binarize(&s).unwrap();
        assert_eq!(spins.spins().column(0).iter().copied().collect::<Vec<_>>(), vec![1, -1, -1]);
        assert_eq!(spins.dates().unwrap().len(), 3);
        assert_eq!(spins.labels(), &["X".to_string()]);
    }

    #[test]
    fn nonpositive_price_rejected_with_position() {
        let err = PriceSeries::new(
            vec!["X".into(), "Y".into()],
            vec!["2020-01-01".into()],
            DMatrix::from_row_slice(1, 2, &[100.0, -3.0]),
            DMatrix::from_row_slice(1, 2, &[100.0, 4.0]),
        )
        .unwrap_err();
        match err {
            CoreError::InvalidPrice { row, column, .. } => {
                assert_eq!((row, column), (0, 1));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dates_must_increase() {
        let err = PriceSeries::new(
            vec!["X".into()],
            vec!["2020-01-02".into(), "2020-01-01".into()],
            DMatrix::from_element(2, 1, 1.0),
            DMatrix::from_element(2, 1, 2.0),
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::InvalidInput(_)));
    }

    #[test]
    fn window_counts() {
        let spins = SpinMatrix::from_rows(
            vec!["A".into(), "B".into()],
            &(0..10).map(|i| vec![if i % 2 == 0 { 1 } else { -1 }, 1]).collect::<Vec<_>>(),
        )
        .unwrap();
        let spec = WindowSpec::new(4, 2).unwrap();
        let windows = sliding_windows(&spins, &spec).unwrap();
        assert_eq!(windows.len(), 4);
        assert_eq!(spec.starts(10), vec![0, 2, 4, 6]);

        let full = WindowSpec::new(10, 1).unwrap();
        assert_eq!(sliding_windows(&spins, &full).unwrap().len(), 1);

        let too_wide = WindowSpec::new(11, 1).unwrap();
        assert!(sliding_windows(&spins, &too_wide).is_err());
    }

    #[test]
    fn window_count_formula_large_series() {
        let spec = WindowSpec::new(300, 1).unwrap();
        assert_eq!(spec.count(2253), 1954);
    }

    #[test]
    fn bad_spin_value_rejected() {
        let m = DMatrix::from_row_slice(1, 2, &[1i8, 0i8]);
        assert!(SpinMatrix::new(vec!["A".into(), "B".into()], m, None).is_err());
    }
}
