//! Stage-toggle grid on a fixed train/test split.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, Stages};
use super::metrics::Metrics;
use super::model::{fit_staged, predict, stage_delays, stage_importance, StageOverrides};
use crate::dataset::TimeSeriesTable;
use crate::mic_delay::DelayMap;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub stages: Stages,
    pub n_inputs: usize,
    pub metrics: Metrics,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn get(&self, stages: Stages) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.stages == stages)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["delay", "select", "vmd", "ec", "inputs", "mse", "mae", "mape"])?;
        for r in &self.rows {
            let s = r.stages;
            w.write_record([
                s.delay.to_string(),
                s.select.to_string(),
                s.vmd.to_string(),
                s.ec.to_string(),
                r.n_inputs.to_string(),
                format!("{:?}", r.metrics.mse),
                format!("{:?}", r.metrics.mae),
                r.metrics.mape.map_or(String::new(), |v| format!("{v:?}")),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width comparison table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<6} {:<6} {:<4} {:<4} {:>6} {:>12} {:>12} {:>10}",
            "delay", "select", "vmd", "ec", "inputs", "MSE", "MAE", "MAPE%"
        );
        let flag = |b: bool| if b { "on" } else { "off" };
        for r in &self.rows {
            let s = r.stages;
            let mape = r.metrics.mape.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                out,
                "{:<6} {:<6} {:<4} {:<4} {:>6} {:>12.6} {:>12.6} {:>10}",
                flag(s.delay),
                flag(s.select),
                flag(s.vmd),
                flag(s.ec),
                r.n_inputs,
                r.metrics.mse,
                r.metrics.mae,
                mape
            );
        }
        out
    }
}

/// All 16 stage combinations, delay varying slowest.
pub fn grid() -> Vec<Stages> {
    let mut cells = Vec::with_capacity(16);
    for delay in [true, false] {
        for select in [true, false] {
            for vmd in [true, false] {
                for ec in [true, false] {
                    cells.push(Stages { delay, select, vmd, ec });
                }
            }
        }
    }
    cells
}

/// Runs the full grid with shared seeds.
///
/// Delays and importances are computed once per delay setting. Each
/// EC-on/EC-off pair shares one fit: the initial network draws from its own
/// seed stream, so it is the same network in both cells.
pub fn ablate(train: &TimeSeriesTable, test: &TimeSeriesTable, config: &PipelineConfig) -> Result<AblationReport> {
    let estimated = stage_delays(train, config)?;
    let zeros = DelayMap::zeros(train.schema(), train.sample_period());
    let (imp_on, imp_off) = rayon::join(
        || stage_importance(train, config, &estimated),
        || stage_importance(train, config, &zeros),
    );
    let (imp_on, imp_off) = (imp_on?, imp_off?);

    let pairs: Vec<Stages> = grid().into_iter().filter(|s| s.ec).collect();
    let rows: Vec<Vec<AblationRow>> = pairs
        .par_iter()
        .map(|&stages| {
            let mut cfg = config.clone();
            cfg.stages = stages;
            let overrides = StageOverrides {
                delays: Some(if stages.delay { estimated.clone() } else { zeros.clone() }),
                importance: Some(if stages.delay { imp_on.clone() } else { imp_off.clone() }),
            };
            let model = fit_staged(train, &cfg, &overrides)?;
            let report = predict(&model, test)?;
            let n_inputs = model.initial.input_dim();
            let hybrid = report.hybrid.expect("correction stage is enabled");
            Ok(vec![
                AblationRow {
                    stages,
                    n_inputs,
                    metrics: hybrid,
                    seconds: report.timing.hybrid_seconds,
                },
                AblationRow {
                    stages: Stages { ec: false, ..stages },
                    n_inputs,
                    metrics: report.initial,
                    seconds: report.timing.initial_seconds,
                },
            ])
        })
        .collect::<Result<_>>()?;
    Ok(AblationReport {
        rows: rows.into_iter().flatten().collect(),
    })
}
