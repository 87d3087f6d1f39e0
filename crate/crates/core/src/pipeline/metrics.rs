use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mean absolute, mean squared and mean absolute percentage error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    /// Percent; `None` when some true value is zero.
    pub mape: Option<f64>,
}

pub fn metrics<T: Real>(y_true: &[T], y_pred: &[T]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::NoRows);
    }
    let n = T::from_count(y_true.len());
    let mut abs = T::zero();
    let mut sq = T::zero();
    let mut pct = T::zero();
    let mut mape_defined = true;
    for (&y, &p) in y_true.iter().zip(y_pred) {
        let e = y - p;
        abs += e.abs();
        sq += e * e;
        if y == T::zero() {
            mape_defined = false;
        } else {
            pct += e.abs() / y;
        }
    }
    Ok(Metrics {
        mae: (abs / n).as_f64(),
        mse: (sq / n).as_f64(),
        mape: mape_defined.then(|| (pct / n * T::lit(100.0)).as_f64()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let m = metrics(&[2.0, 4.0], &[2.0, 4.0]).unwrap();
        assert_eq!((m.mae, m.mse, m.mape), (0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn single_point() {
        let m = metrics(&[10.0], &[9.0]).unwrap();
        assert_eq!((m.mae, m.mse), (1.0, 1.0));
        assert!((m.mape.unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_truth_leaves_mape_undefined() {
        let m = metrics(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.mape, None);
        assert_eq!(m.mae, 0.5);
    }

    #[test]
    fn length_errors() {
        assert!(metrics::<f64>(&[], &[]).is_err());
        assert!(metrics(&[1.0], &[1.0, 2.0]).is_err());
    }
}
