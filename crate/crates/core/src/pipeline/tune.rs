//! Hidden-layer size search on a chronological validation tail.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::model::{fit_with_design, report, run_heads, test_design, train_heads, StageOverrides};
use crate::dataset::{split, TimeSeriesTable};
use crate::error::{Error, Result};

/// `points` sizes spread evenly over `[lo, hi]`, rounded.
pub fn hidden_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    if points < 2 {
        return vec![lo];
    }
    (0..points)
        .map(|i| (lo as f64 + (hi - lo) as f64 * i as f64 / (points - 1) as f64).round() as usize)
        .collect()
}

/// Default search: 20 to 300 neurons in 10 steps.
pub fn default_hidden_grid() -> Vec<usize> {
    hidden_grid(20, 300, 10)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenSearch {
    /// `(hidden, validation MAPE)` of the initial network, in grid order.
    pub scores: Vec<(usize, f64)>,
    pub best: usize,
}

/// Fits the pipeline on the leading `1 - validation_fraction` of `train` and
/// scores the initial network on the tail for every size in `grid`. The
/// smallest size wins ties.
pub fn tune_hidden(
    train: &TimeSeriesTable,
    config: &PipelineConfig,
    grid: &[usize],
    validation_fraction: f64,
) -> Result<HiddenSearch> {
    if grid.is_empty() || grid.contains(&0) {
        return Err(Error::invalid("hidden-size grid must be non-empty and positive"));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::invalid("validation fraction must lie in (0, 1)"));
    }
    let n_fit = ((1.0 - validation_fraction) * train.n_rows() as f64).round() as usize;
    let (fit_rows, val_rows) = split(train, n_fit)?;
    let mut cfg = config.clone();
    cfg.stages.ec = false;
    let (model, design) = fit_with_design(&fit_rows, &cfg, &StageOverrides::default())?;
    let (val, measured) = test_design(&model, &val_rows)?;

    let scores: Vec<(usize, f64)> = grid
        .par_iter()
        .map(|&hidden| {
            let mut c = cfg.clone();
            c.elm.hidden = hidden;
            let (initial, _) = train_heads(&design.x, &design.y, &c)?;
            let heads = run_heads(&initial, None, &val.x, &val.y, c.error_lags, c.feedback)?;
            let mape = report(&model, &heads, measured.clone())?
                .initial
                .mape
                .ok_or_else(|| Error::invalid("MAPE undefined: the validation target contains zeros"))?;
            Ok((hidden, mape))
        })
        .collect::<Result<_>>()?;
    let best = scores
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|s| s.0)
        .expect("grid is non-empty");
    Ok(HiddenSearch { scores, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_20_to_300() {
        let g = default_hidden_grid();
        assert_eq!(g.len(), 10);
        assert_eq!(g, vec![20, 51, 82, 113, 144, 176, 207, 238, 269, 300]);
    }
}
