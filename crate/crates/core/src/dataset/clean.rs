//! Pauta (3-sigma) outlier screening.

use super::table::TimeSeriesTable;
use crate::scalar::{mean, variance, Real};

pub const DEFAULT_SIGMA_K: f64 = 3.0;
pub const DEFAULT_LOOKBACK: usize = 5;

/// Replaces every value farther than `sigma_k` standard deviations from the
/// column mean with the mean of the `lookback` preceding cleaned values.
///
/// Statistics are computed once on the raw column and the column is scanned
/// in a single pass. Near the start the window shrinks to the available
/// predecessors; an outlier at index 0 takes the column median.
pub fn clean_column<T: Real>(values: &[T], sigma_k: T, lookback: usize) -> Vec<T> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let m = mean(values);
    let sd = variance(values).sqrt();
    if !(sd > T::zero()) {
        return values.to_vec();
    }
    let limit = sigma_k * sd;
    let mut out = Vec::with_capacity(n);
    for (i, &x) in values.iter().enumerate() {
        if (x - m).abs() <= limit {
            out.push(x);
            continue;
        }
        let replacement = if i == 0 {
            median(values)
        } else {
            let from = i.saturating_sub(lookback.max(1));
            mean(&out[from..i])
        };
        out.push(replacement);
    }
    out
}

fn median<T: Real>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// Applies [`clean_column`] to every column of the table.
pub fn clean_outliers(table: &TimeSeriesTable, sigma_k: f64, lookback: usize) -> TimeSeriesTable {
    let columns = table
        .columns()
        .iter()
        .map(|c| clean_column(c, sigma_k, lookback))
        .collect();
    table.with_columns(columns).expect("cleaning preserves shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spike_replaced_by_prior_mean() {
        let mut col = vec![1.0; 200];
        col[5] = 100.0;
        let out = clean_column(&col, 3.0, 5);
        assert_eq!(out[5], 1.0);
        assert_eq!(out.len(), col.len());
    }

    #[test]
    fn nothing_beyond_three_sigma_is_identity() {
        let col: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
        assert_eq!(clean_column(&col, 3.0, 5), col);
    }

    #[test]
    fn early_outlier_uses_partial_window() {
        let mut col: Vec<f64> = (0..300).map(|i| 10.0 + ((i * 7) % 5) as f64 * 0.1).collect();
        col[3] = 500.0;
        let out = clean_column(&col, 3.0, 5);
        // Hand computation: mean of the three predecessors.
        let expected = (col[0] + col[1] + col[2]) / 3.0;
        assert_eq!(out[3], expected);
        assert!((expected - 10.2).abs() < 1e-12);
    }

    #[test]
    fn outlier_at_start_takes_median() {
        let mut col = vec![2.0; 101];
        col[0] = -400.0;
        col[1] = 3.0;
        let out = clean_column(&col, 3.0, 5);
        assert_eq!(out[0], 2.0);
    }

    #[test]
    fn zero_variance_is_noop() {
        let col = vec![4.2; 30];
        assert_eq!(clean_column(&col, 3.0, 5), col);
    }

    #[test]
    fn idempotent_with_single_spike() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut col: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..1.0)).collect();
            let at = rng.random_range(0..500);
            col[at] = 40.0;
            let once = clean_column(&col, 3.0, 5);
            assert_ne!(once, col);
            assert_eq!(clean_column(&once, 3.0, 5), once);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let mut col = vec![1.0f32; 100];
        col[50] = 90.0;
        assert_eq!(clean_column(&col, 3.0, 5)[50], 1.0);
    }
}
