//! Data-layer invariants: binarization produces only signs, moments agree
//! with the configuration distribution, and non-overlapping windows tile the
//! series.

use maxent_market::moments::{
    empirical_distribution, empirical_moments, moments_of_distribution,
};
use maxent_market::spin::{binarize, sliding_windows, PriceSeries, SpinMatrix, WindowSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn price_series_strategy() -> impl Strategy<Value = PriceSeries> {
    (1usize..12, 1usize..6).prop_flat_map(|(t, n)| {
        let cells = prop::collection::vec(
            (0.01f64..1e6, 0.01f64..1e6),
            t * n,
        );
        cells.prop_map(move |values| {
            let open = DMatrix::from_fn(t, n, |r, c| values[r * n + c].0);
            let close = DMatrix::from_fn(t, n, |r, c| values[r * n + c].1);
            PriceSeries::new(
                (0..n).map(|i| format!("a{i}")).collect(),
                (0..t).map(|i| format!("d{i:04}")).collect(),
                open,
                close,
            )
            .unwrap()
        })
    })
}

fn spin_matrix_strategy(max_t: usize, max_n: usize) -> impl Strategy<Value = SpinMatrix> {
    (1usize..=max_t, 1usize..=max_n).prop_flat_map(|(t, n)| {
        prop::collection::vec(prop::bool::ANY, t * n).prop_map(move |bits| {
            let m = DMatrix::from_fn(t, n, |r, c| if bits[r * n + c] { 1i8 } else { -1 });
            SpinMatrix::new((0..n).map(|i| format!("a{i}")).collect(), m, None).unwrap()
        })
    })
}

proptest! {
    /// Binarization yields entries in {-1, +1}, rising prices map to +1, and
    /// ties map to -1.
    #[test]
    fn binarize_produces_only_signs(prices in price_series_strategy()) {
        let spins = binarize(&prices).unwrap();
        for r in 0..spins.num_days() {
            for c in 0..spins.num_assets() {
                let s = spins.spins()[(r, c)];
                prop_assert!(s == 1 || s == -1);
                let expected = if prices.close()[(r, c)] > prices.open()[(r, c)] { 1 } else { -1 };
                prop_assert_eq!(s, expected);
            }
        }
    }

    /// Moments recomputed from the configuration-frequency table match the
    /// direct estimator to 1e-12.
    #[test]
    fn distribution_moments_match_direct(spins in spin_matrix_strategy(40, 6)) {
        let direct = empirical_moments(&spins);
        let table = empirical_distribution(&spins).unwrap();
        let via_table = moments_of_distribution(&table);
        for i in 0..spins.num_assets() {
            prop_assert!((direct.mean()[i] - via_table.mean()[i]).abs() <= 1e-12);
            for j in 0..spins.num_assets() {
                prop_assert!((direct.pair()[(i, j)] - via_table.pair()[(i, j)]).abs() <= 1e-12);
            }
        }
        let mass: f64 = table.entries().values().sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
    }

    /// With shift == width the windows tile the series: concatenating their
    /// rows reproduces the first count*width rows exactly.
    #[test]
    fn tiling_windows_cover_prefix(spins in spin_matrix_strategy(60, 4), width in 1usize..12) {
        prop_assume!(width <= spins.num_days());
        let spec = WindowSpec::new(width, width).unwrap();
        let windows = sliding_windows(&spins, &spec).unwrap();
        let count = spec.count(spins.num_days());
        prop_assert_eq!(windows.len(), count);
        for (k, window) in windows.iter().enumerate() {
            prop_assert_eq!(window.num_days(), width);
            for r in 0..width {
                for c in 0..spins.num_assets() {
                    prop_assert_eq!(window.spins()[(r, c)], spins.spins()[(k * width + r, c)]);
                }
            }
        }
    }

    /// Covariance matrices estimated from data are positive semidefinite.
    #[test]
    fn empirical_covariance_is_psd(spins in spin_matrix_strategy(50, 6)) {
        let covariance = empirical_moments(&spins).covariance();
        let eigenvalues = nalgebra::SymmetricEigen::new(covariance).eigenvalues;
        for lambda in eigenvalues.iter() {
            prop_assert!(*lambda >= -1e-10, "negative eigenvalue {lambda}");
        }
    }

    /// Window starts advance by the shift and stay in range.
    #[test]
    fn window_starts_are_arithmetic(t in 1usize..500, width in 1usize..50, shift in 1usize..20) {
        prop_assume!(width <= t);
        let spec = WindowSpec::new(width, shift).unwrap();
        let starts = spec.starts(t);
        prop_assert_eq!(starts.len(), (t - width) / shift + 1);
        for (k, &s) in starts.iter().enumerate() {
            prop_assert_eq!(s, k * shift);
            prop_assert!(s + width <= t);
        }
    }
}
