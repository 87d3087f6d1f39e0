//! Per-variable delay search and delay-aligned reconstruction.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mic::{grid_shapes, mic_prepared, MicScore, RankBins, MIN_SAMPLES};
use crate::dataset::{Schema, TimeSeriesTable};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayEntry {
    pub lag_samples: usize,
    pub lag_seconds: f64,
    pub mic: f64,
}

/// Lag per input variable, keyed by label.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DelayMap {
    entries: BTreeMap<String, DelayEntry>,
}

impl DelayMap {
    pub fn insert(&mut self, label: &str, lag_samples: usize, sample_period: f64, mic: f64) {
        self.entries.insert(
            label.to_string(),
            DelayEntry {
                lag_samples,
                lag_seconds: lag_samples as f64 * sample_period,
                mic,
            },
        );
    }

    /// Zero lag for every candidate of the schema.
    pub fn zeros(schema: &Schema, sample_period: f64) -> Self {
        let mut m = Self::default();
        for l in schema.candidates() {
            m.insert(&l, 0, sample_period, 0.0);
        }
        m
    }

    pub fn get(&self, label: &str) -> Option<&DelayEntry> {
        self.entries.get(label)
    }

    pub fn lag(&self, label: &str) -> Option<usize> {
        self.entries.get(label).map(|e| e.lag_samples)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        self.entries.values().map(|e| e.lag_samples).max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DelayEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Scans lags `0..=k_max` and returns the lag whose shifted input has the
/// highest MIC with the target, together with that MIC. Ties go to the
/// smallest lag.
///
/// All lags are scored on the same target window `t in [k_max, n)`, pairing
/// `y(t)` with `x(t - j)`.
pub fn estimate_delay<T: Real>(x: &[T], y: &[T], k_max: usize, b_exponent: f64) -> Result<(usize, T)> {
    let scores = lag_profile(x, y, k_max, b_exponent)?;
    Ok(argmax_smallest(&scores))
}

/// MIC of `x(t - j)` against `y(t)` for every `j` in `0..=k_max`.
pub fn lag_profile<T: Real>(x: &[T], y: &[T], k_max: usize, b_exponent: f64) -> Result<Vec<T>> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: x.len(),
        });
    }
    let n = y.len();
    if k_max + MIN_SAMPLES >= n {
        return Err(Error::invalid(format!(
            "k_max = {k_max} leaves fewer than {MIN_SAMPLES} overlapping samples out of {n}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("delay search input"));
    }
    let window = n - k_max;
    let shapes = grid_shapes(window, b_exponent);
    let max_bins = shapes.iter().map(|s| s.0).max().unwrap_or(0);
    let ry = RankBins::new(&y[k_max..], max_bins);
    let scores = (0..=k_max)
        .into_par_iter()
        .map(|j| {
            let rx = RankBins::new(&x[k_max - j..n - j], max_bins);
            let s: MicScore<T> = mic_prepared(&rx, &ry, &shapes);
            s.value
        })
        .collect();
    Ok(scores)
}

fn argmax_smallest<T: Real>(scores: &[T]) -> (usize, T) {
    let mut best = (0, scores[0]);
    for (j, &s) in scores.iter().enumerate().skip(1) {
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelayConfig {
    pub b_exponent: f64,
    /// Overrides the group-derived search cap (samples) for every variable.
    pub k_max: Option<usize>,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            b_exponent: super::mic::DEFAULT_B_EXPONENT,
            k_max: None,
        }
    }
}

/// Delay of every candidate input against the table's target. Variables are
/// searched up to their group's cap.
pub fn estimate_delays(table: &TimeSeriesTable, cfg: &DelayConfig) -> Result<DelayMap> {
    let schema = table.schema();
    let y = table.target();
    let period = table.sample_period();
    let found = schema
        .candidates()
        .into_par_iter()
        .map(|label| {
            let var = schema.get(&label).expect("candidate in schema");
            let k_max = cfg
                .k_max
                .unwrap_or_else(|| var.group.max_delay_samples(period));
            let x = table.column(&label)?;
            let (lag, m) = estimate_delay(x, y, k_max, cfg.b_exponent)?;
            Ok((label, lag, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut map = DelayMap::default();
    for (label, lag, m) in found {
        map.insert(&label, lag, period, m);
    }
    Ok(map)
}

/// Pairs `y(t)` with every `x_i(t - d_i)`, dropping the first `max d_i` rows.
pub fn reconstruct(table: &TimeSeriesTable, delays: &DelayMap, target_label: &str) -> Result<TimeSeriesTable> {
    let schema = table.schema();
    if schema.index_of(target_label).is_none() {
        return Err(Error::UnknownLabel(target_label.to_string()));
    }
    let mut lags = Vec::with_capacity(schema.len());
    for label in schema.labels() {
        if label == target_label {
            lags.push(0);
        } else {
            let lag = delays
                .lag(label)
                .ok_or_else(|| Error::invalid(format!("no delay entry for {label:?}")))?;
            lags.push(lag);
        }
    }
    let n = table.n_rows();
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if max_lag >= n {
        return Err(Error::invalid(format!(
            "largest delay {max_lag} leaves no rows out of {n}"
        )));
    }
    let columns = table
        .columns()
        .iter()
        .zip(&lags)
        .map(|(col, &d)| col[max_lag - d..n - d].to_vec())
        .collect();
    table.with_columns(columns)
}
