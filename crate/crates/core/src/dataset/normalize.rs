use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::TimeSeriesTable;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-column min-max bounds in physical units.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    bounds: BTreeMap<String, (f64, f64)>,
}

impl NormParams {
    pub fn bounds(&self, label: &str) -> Result<(f64, f64)> {
        self.bounds
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.bounds.keys().map(String::as_str)
    }

    /// Scales a table with these (frozen) bounds. Values outside the
    /// training range land outside `[0, 1]`.
    pub fn apply(&self, table: &TimeSeriesTable) -> Result<TimeSeriesTable> {
        let columns = table
            .schema()
            .labels()
            .zip(table.columns())
            .map(|(label, col)| {
                let (lo, hi) = self.bounds(label)?;
                Ok(col.iter().map(|&x| scale(x, lo, hi)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        table.with_columns(columns)
    }
}

#[inline]
pub fn scale<T: Real>(x: T, lo: T, hi: T) -> T {
    (x - lo) / (hi - lo)
}

#[inline]
pub fn unscale<T: Real>(x: T, lo: T, hi: T) -> T {
    x * (hi - lo) + lo
}

/// Column extremes as `(min, max)`.
pub fn column_bounds<T: Real>(col: &[T]) -> (T, T) {
    col.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// Min-max scales every column to `[0, 1]`, returning the bounds used.
pub fn normalize(table: &TimeSeriesTable) -> Result<(TimeSeriesTable, NormParams)> {
    let mut params = NormParams::default();
    for (label, col) in table.schema().labels().zip(table.columns()) {
        let (lo, hi) = column_bounds(col);
        if !(hi > lo) {
            return Err(Error::ConstantColumn(label.to_string()));
        }
        params.bounds.insert(label.to_string(), (lo, hi));
    }
    let scaled = params.apply(table)?;
    Ok((scaled, params))
}

/// Maps normalized values of `label` back to physical units.
pub fn denormalize(values: &[f64], params: &NormParams, label: &str) -> Result<Vec<f64>> {
    let (lo, hi) = params.bounds(label)?;
    Ok(values.iter().map(|&x| unscale(x, lo, hi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::schema::{Schema, VariableGroup, VariableSchema};
    use proptest::prelude::*;

    fn one_column(values: Vec<f64>) -> TimeSeriesTable {
        let schema = Schema::new(
            vec![VariableSchema::new("Y", "", (0.0, 1.0), VariableGroup::ScrInternal)],
            "Y",
        )
        .unwrap();
        TimeSeriesTable::new(schema, vec![values], 10.0).unwrap()
    }

    #[test]
    fn outlet_nox_bounds_map_to_unit_interval() {
        let (t, p) = normalize(&one_column(vec![21.378, 37.241])).unwrap();
        assert_eq!(t.target(), &[0.0, 1.0]);
        assert_eq!(p.bounds("Y").unwrap(), (21.378, 37.241));
    }

    #[test]
    fn unit_column_unchanged() {
        let (t, _) = normalize(&one_column(vec![0.0, 0.5, 1.0])).unwrap();
        assert_eq!(t.target(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_is_named() {
        let err = normalize(&one_column(vec![3.0, 3.0])).unwrap_err();
        assert!(matches!(err, Error::ConstantColumn(ref l) if l == "Y"));
    }

    #[test]
    fn denormalize_midpoint_and_ends() {
        let (_, p) = normalize(&one_column(vec![21.378, 30.0, 37.241])).unwrap();
        let v = denormalize(&[0.5, 0.0, 1.0], &p, "Y").unwrap();
        assert!((v[0] - 29.3095).abs() < 1e-12);
        assert_eq!(v[1], 21.378);
        assert_eq!(v[2], 37.241);
        assert!(matches!(denormalize(&[0.5], &p, "nope"), Err(Error::UnknownLabel(_))));
    }

    proptest! {
        #[test]
        fn round_trip_and_extremes(col in prop::collection::vec(-1e4f64..1e4, 2..60)) {
            let (lo, hi) = column_bounds(&col);
            prop_assume!(hi > lo);
            let (t, p) = normalize(&one_column(col.clone())).unwrap();
            let scaled = t.target();
            prop_assert!(scaled.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!(scaled.contains(&0.0));
            prop_assert!(scaled.contains(&1.0));
            let back = denormalize(scaled, &p, "Y").unwrap();
            for (a, b) in back.iter().zip(&col) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(hi - lo));
            }
        }
    }
}
