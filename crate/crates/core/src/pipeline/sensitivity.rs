//! Mean-substitution sensitivity of the fitted predictor.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::model::{fit_with_design, report, run_heads, test_design, train_heads, StageOverrides};
use crate::dataset::TimeSeriesTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    /// Substituted variable; `None` for the unmodified baseline.
    pub feature: Option<String>,
    pub mape: f64,
    /// `(MAPE - baseline) / baseline`, percent.
    pub growth_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub baseline_mape: f64,
    /// Baseline first, then one row per input variable in model order.
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityReport {
    pub fn get(&self, feature: &str) -> Option<&SensitivityRow> {
        self.rows.iter().find(|r| r.feature.as_deref() == Some(feature))
    }

    /// Feature rows ordered by descending growth.
    pub fn ranking(&self) -> Vec<&SensitivityRow> {
        let mut rows: Vec<_> = self.rows.iter().filter(|r| r.feature.is_some()).collect();
        rows.sort_by(|a, b| b.growth_pct.total_cmp(&a.growth_pct));
        rows
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["feature", "mape", "growth_pct"])?;
        for r in &self.rows {
            w.write_record([
                r.feature.clone().unwrap_or_else(|| "Mo".to_string()),
                format!("{:?}", r.mape),
                format!("{:?}", r.growth_pct),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>10} {:>10}", "feature", "MAPE%", "growth%");
        for r in &self.rows {
            let name = r.feature.as_deref().unwrap_or("Mo");
            let _ = writeln!(out, "{:<10} {:>10.4} {:>10.2}", name, r.mape, r.growth_pct);
        }
        out
    }
}

/// Replaces `cols` in both designs by their training means.
fn substitute(train: &DMatrix<f64>, test: &DMatrix<f64>, cols: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut tr = train.clone();
    let mut te = test.clone();
    for &c in cols {
        let mean = train.column(c).mean();
        tr.column_mut(c).fill(mean);
        te.column_mut(c).fill(mean);
    }
    (tr, te)
}

/// Fits the baseline model, then for each input variable (the modes of the
/// decomposed variable count as one) substitutes its training mean in both
/// splits, retrains the initial network with the same seed and records its
/// test MAPE. The correction network is left out: it would partly recover a
/// removed slow driver from the lagged errors.
pub fn sensitivity(
    train: &TimeSeriesTable,
    test: &TimeSeriesTable,
    config: &PipelineConfig,
) -> Result<SensitivityReport> {
    let (model, design) = fit_with_design(train, config, &StageOverrides::default())?;
    let (test_design, measured) = test_design(&model, test)?;

    let mut elm_only = config.clone();
    elm_only.stages.ec = false;
    let run = |cols: &[usize]| -> Result<f64> {
        let (x_tr, x_te) = substitute(&design.x, &test_design.x, cols);
        let (initial, _) = train_heads(&x_tr, &design.y, &elm_only)?;
        let heads = run_heads(&initial, None, &x_te, &test_design.y, config.error_lags, config.feedback)?;
        let rep = report(&model, &heads, measured.clone())?;
        rep.initial
            .mape
            .ok_or_else(|| Error::invalid("MAPE undefined: the measured target contains zeros").in_stage("sensitivity"))
    };

    let mut jobs: Vec<(Option<String>, Vec<usize>)> = vec![(None, Vec::new())];
    jobs.extend(design.groups.iter().map(|(f, c)| (Some(f.clone()), c.clone())));
    let mapes: Vec<f64> = jobs.par_iter().map(|(_, cols)| run(cols)).collect::<Result<_>>()?;
    let baseline = mapes[0];
    let rows = jobs
        .into_iter()
        .zip(mapes)
        .map(|((feature, _), mape)| SensitivityRow {
            feature,
            mape,
            growth_pct: (mape - baseline) / baseline * 100.0,
        })
        .collect();
    Ok(SensitivityReport {
        baseline_mape: baseline,
        rows,
    })
}
