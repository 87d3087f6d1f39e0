//! Fitting and one-step-ahead evaluation of the hybrid predictor.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ErrorFeedback, PipelineConfig, EC_STREAM, FOREST_STREAM, INITIAL_STREAM};
use super::metrics::{metrics, Metrics};
use crate::dataset::{normalize, unscale, NormParams, Schema, TimeSeriesTable};
use crate::elm::{self, ElmModel};
use crate::error::{Error, Result, StageContext};
use crate::feature_select::{compute_importance, select_features, ImportanceReport};
use crate::mic_delay::{estimate_delays, reconstruct, DelayMap};
use crate::vmd::{decompose, prune_last_mode, select_mode_count};

/// Decomposition state frozen at fit time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmdState {
    pub label: String,
    /// Mode count chosen by the stopping rule (before pruning).
    pub k: usize,
    pub omegas: Vec<f64>,
    pub hit_cap: bool,
    /// Normalized, delay-aligned training series; evaluation decomposes it
    /// together with the new data.
    pub train_signal: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub config: PipelineConfig,
    pub schema: Schema,
    pub norm: NormParams,
    pub delays: DelayMap,
    pub importance: Option<ImportanceReport>,
    /// Selected variables; the decomposed variable comes first.
    pub features: Vec<String>,
    /// Column names of the design matrix.
    pub input_labels: Vec<String>,
    pub vmd: Option<VmdState>,
    pub initial: ElmModel<f64>,
    pub ec: Option<ElmModel<f64>>,
    pub error_lags: usize,
    /// Last `max lag` raw training rows, prepended to new data so that every
    /// evaluation row has its delayed inputs.
    pub history: TimeSeriesTable,
}

impl PipelineModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if let Some(ec) = &m.ec {
            if ec.input_dim() != m.initial.input_dim() + m.error_lags {
                return Err(Error::invalid("correction model input size is inconsistent"));
            }
        }
        Ok(m)
    }
}

/// Stage results supplied by the caller instead of being recomputed.
#[derive(Clone, Debug, Default)]
pub struct StageOverrides {
    pub delays: Option<DelayMap>,
    pub importance: Option<ImportanceReport>,
}

/// Design matrix with the column groups used for sensitivity analysis.
#[derive(Clone, Debug)]
pub(crate) struct Design {
    pub x: DMatrix<f64>,
    /// Normalized target.
    pub y: Vec<f64>,
    /// `(variable, design columns)`.
    pub groups: Vec<(String, Vec<usize>)>,
}

pub fn fit(train: &TimeSeriesTable, config: &PipelineConfig) -> Result<PipelineModel> {
    fit_staged(train, config, &StageOverrides::default())
}

pub fn fit_staged(
    train: &TimeSeriesTable,
    config: &PipelineConfig,
    overrides: &StageOverrides,
) -> Result<PipelineModel> {
    Ok(fit_with_design(train, config, overrides)?.0)
}

pub(crate) fn fit_with_design(
    train: &TimeSeriesTable,
    config: &PipelineConfig,
    overrides: &StageOverrides,
) -> Result<(PipelineModel, Design)> {
    let schema = train.schema().clone();
    let target = schema.target().to_string();
    let (normed, norm) = normalize(train).stage("normalize")?;

    let delays = match (&overrides.delays, config.stages.delay) {
        (Some(d), _) => d.clone(),
        (None, true) => estimate_delays(&normed, &config.delay).stage("delay")?,
        (None, false) => DelayMap::zeros(&schema, train.sample_period()),
    };
    let aligned = reconstruct(&normed, &delays, &target).stage("reconstruct")?;
    let (importance, features) = choose_features(&aligned, config, overrides).stage("select")?;

    let vmd = if config.stages.vmd && features.contains(&config.decompose_label) {
        let signal = aligned.column(&config.decompose_label)?.to_vec();
        let sel = select_mode_count(&signal, &config.vmd, &config.mode_count).stage("vmd")?;
        Some(VmdState {
            label: config.decompose_label.clone(),
            k: sel.k,
            omegas: sel.modes.omegas.clone(),
            hit_cap: sel.hit_cap,
            train_signal: signal,
        })
    } else {
        None
    };
    let train_modes = match &vmd {
        Some(v) => Some(prune_last_mode(&decompose(&v.train_signal, v.k, &config.vmd)?)?.modes),
        None => None,
    };
    let (design, input_labels) = assemble(&aligned, &features, vmd.as_ref(), train_modes.as_deref())?;
    let (initial, ec) = train_heads(&design.x, &design.y, config)?;

    let max_lag = delays.max_lag();
    let n = train.n_rows();
    let model = PipelineModel {
        config: config.clone(),
        schema,
        norm,
        delays,
        importance,
        features,
        input_labels,
        vmd,
        initial,
        ec,
        error_lags: config.error_lags,
        history: train.slice_rows(n - max_lag, n),
    };
    Ok((model, design))
}

fn choose_features(
    aligned: &TimeSeriesTable,
    config: &PipelineConfig,
    overrides: &StageOverrides,
) -> Result<(Option<ImportanceReport>, Vec<String>)> {
    if !config.stages.select {
        let all = aligned.schema().candidates();
        return Ok((None, decomposed_first(all, &config.decompose_label)));
    }
    let report = match &overrides.importance {
        Some(r) => r.clone(),
        None => aligned_importance(aligned, config)?,
    };
    let chosen = select_features(&report, config.selection.threshold, &config.selection.forced)?;
    Ok((Some(report), decomposed_first(chosen, &config.decompose_label)))
}

fn aligned_importance(aligned: &TimeSeriesTable, config: &PipelineConfig) -> Result<ImportanceReport> {
    let candidates = aligned.schema().candidates();
    let x: Vec<Vec<f64>> = candidates
        .iter()
        .map(|l| aligned.column(l).map(<[f64]>::to_vec))
        .collect::<Result<_>>()?;
    let mut sel = config.selection.clone();
    sel.forest.seed = derive_seed(config.seed, FOREST_STREAM);
    compute_importance(&candidates, &x, aligned.target(), &sel)
}

/// Delays and importances as `fit` would compute them, for reuse across runs
/// that share a training split.
pub(crate) fn stage_delays(train: &TimeSeriesTable, config: &PipelineConfig) -> Result<DelayMap> {
    let (normed, _) = normalize(train).stage("normalize")?;
    estimate_delays(&normed, &config.delay).stage("delay")
}

pub(crate) fn stage_importance(
    train: &TimeSeriesTable,
    config: &PipelineConfig,
    delays: &DelayMap,
) -> Result<ImportanceReport> {
    let (normed, _) = normalize(train).stage("normalize")?;
    let aligned = reconstruct(&normed, delays, train.schema().target()).stage("reconstruct")?;
    aligned_importance(&aligned, config).stage("select")
}

fn decomposed_first(mut features: Vec<String>, label: &str) -> Vec<String> {
    if let Some(i) = features.iter().position(|f| f == label) {
        let f = features.remove(i);
        features.insert(0, f);
    }
    features
}

/// Builds the design matrix: retained modes of the decomposed variable, then
/// the remaining features as aligned columns.
fn assemble(
    aligned: &TimeSeriesTable,
    features: &[String],
    vmd: Option<&VmdState>,
    modes: Option<&[Vec<f64>]>,
) -> Result<(Design, Vec<String>)> {
    let rows = aligned.n_rows();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for f in features {
        match (vmd, modes) {
            (Some(v), Some(m)) if *f == v.label => {
                let start = cols.len();
                for (i, mode) in m.iter().enumerate() {
                    debug_assert_eq!(mode.len(), rows);
                    cols.push(mode.clone());
                    labels.push(format!("{f}_imf{}", i + 1));
                }
                groups.push((f.clone(), (start..cols.len()).collect()));
            }
            _ => {
                groups.push((f.clone(), vec![cols.len()]));
                cols.push(aligned.column(f)?.to_vec());
                labels.push(f.clone());
            }
        }
    }
    let x = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]);
    Ok((
        Design {
            x,
            y: aligned.target().to_vec(),
            groups,
        },
        labels,
    ))
}

/// Trains the initial ELM and, if enabled, the error-correction ELM on
/// in-sample errors.
pub(crate) fn train_heads(
    x: &DMatrix<f64>,
    y: &[f64],
    config: &PipelineConfig,
) -> Result<(ElmModel<f64>, Option<ElmModel<f64>>)> {
    let targets = DMatrix::from_column_slice(y.len(), 1, y);
    let initial = elm::train(x, &targets, &config.elm.with_seed(derive_seed(config.seed, INITIAL_STREAM)))
        .stage("elm")?;
    if !config.stages.ec {
        return Ok((initial, None));
    }
    let lags = config.error_lags;
    if y.len() <= lags {
        return Err(Error::invalid("too few rows to train the correction model").in_stage("ec"));
    }
    let y_p = initial.predict(x)?;
    let errors: Vec<f64> = y.iter().zip(y_p.iter()).map(|(m, p)| m - p).collect();
    let ec_x = correction_inputs(x, &errors, lags);
    let ec_t = DMatrix::from_column_slice(y.len() - lags, 1, &errors[lags..]);
    let ec = elm::train(&ec_x, &ec_t, &config.ec_elm.with_seed(derive_seed(config.seed, EC_STREAM)))
        .stage("ec")?;
    Ok((initial, Some(ec)))
}

/// Rows `t >= lags` of `[e(t-1), ..., e(t-lags), x(t)]`.
fn correction_inputs(x: &DMatrix<f64>, errors: &[f64], lags: usize) -> DMatrix<f64> {
    let n = x.nrows();
    let d = x.ncols();
    DMatrix::from_fn(n - lags, lags + d, |r, c| {
        let t = r + lags;
        if c < lags {
            errors[t - 1 - c]
        } else {
            x[(t, c - lags)]
        }
    })
}

/// Normalized outputs of the two heads on a test design.
#[derive(Clone, Debug)]
pub(crate) struct HeadOutputs {
    pub initial: Vec<f64>,
    /// Correction per row; zero during warm-up.
    pub correction: Option<Vec<f64>>,
    pub hybrid: Option<Vec<f64>>,
    pub initial_seconds: f64,
    pub hybrid_seconds: f64,
}

pub(crate) fn run_heads(
    initial: &ElmModel<f64>,
    ec: Option<&ElmModel<f64>>,
    x: &DMatrix<f64>,
    measured: &[f64],
    lags: usize,
    feedback: ErrorFeedback,
) -> Result<HeadOutputs> {
    let start = Instant::now();
    let y_p: Vec<f64> = initial.predict(x)?.iter().copied().collect();
    let initial_seconds = start.elapsed().as_secs_f64();
    let Some(ec) = ec else {
        return Ok(HeadOutputs {
            initial: y_p,
            correction: None,
            hybrid: None,
            initial_seconds,
            hybrid_seconds: initial_seconds,
        });
    };
    let n = x.nrows();
    let mut correction = vec![0.0; n];
    let mut hybrid = y_p.clone();
    match feedback {
        ErrorFeedback::Measured => {
            if n > lags {
                let errors: Vec<f64> = measured.iter().zip(&y_p).map(|(m, p)| m - p).collect();
                let ec_x = correction_inputs(x, &errors, lags);
                let e_p = ec.predict(&ec_x)?;
                for (r, &e) in e_p.iter().enumerate() {
                    correction[r + lags] = e;
                    hybrid[r + lags] = y_p[r + lags] + e;
                }
            }
        }
        ErrorFeedback::Recursive => {
            let d = x.ncols();
            for t in lags..n {
                let row = DMatrix::from_fn(1, lags + d, |_, c| {
                    if c < lags {
                        correction[t - 1 - c]
                    } else {
                        x[(t, c - lags)]
                    }
                });
                let e = ec.predict(&row)?[(0, 0)];
                correction[t] = e;
                hybrid[t] = y_p[t] + e;
            }
        }
    }
    let hybrid_seconds = start.elapsed().as_secs_f64();
    Ok(HeadOutputs {
        initial: y_p,
        correction: Some(correction),
        hybrid: Some(hybrid),
        initial_seconds,
        hybrid_seconds,
    })
}

/// Evaluation design for rows that continue the training series.
pub(crate) fn test_design(model: &PipelineModel, table: &TimeSeriesTable) -> Result<(Design, Vec<f64>)> {
    if table.schema() != &model.schema {
        for label in model.schema.labels() {
            if table.schema().index_of(label).is_none() {
                return Err(if label == model.schema.target() {
                    measured_target_required(label)
                } else {
                    Error::MissingColumn(label.to_string())
                });
            }
        }
        return Err(Error::Schema("evaluation table schema differs from the training schema".into()));
    }
    let target = model.schema.target();
    let raw_measured = table.target().to_vec();
    let joined = model.history.concat(table)?;
    let normed = model.norm.apply(&joined).stage("normalize")?;
    let aligned = reconstruct(&normed, &model.delays, target).stage("reconstruct")?;
    debug_assert_eq!(aligned.n_rows(), table.n_rows());

    let modes = match &model.vmd {
        Some(v) => {
            let new = aligned.column(&v.label)?;
            let signal: Vec<f64> = v.train_signal.iter().chain(new).copied().collect();
            let set = prune_last_mode(&decompose(&signal, v.k, &model.config.vmd)?).stage("vmd")?;
            let skip = v.train_signal.len();
            Some(set.modes.into_iter().map(|m| m[skip..].to_vec()).collect::<Vec<_>>())
        }
        None => None,
    };
    let (design, _) = assemble(&aligned, &model.features, model.vmd.as_ref(), modes.as_deref())?;
    Ok((design, raw_measured))
}

fn measured_target_required(label: &str) -> Error {
    Error::invalid(format!(
        "evaluation needs the measured target {label:?}: the correction stage feeds back realized \
         errors one step ahead"
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Wall time of the initial model on the whole batch.
    pub initial_seconds: f64,
    /// Wall time including the correction model.
    pub hybrid_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub initial: Metrics,
    pub hybrid: Option<Metrics>,
    /// Physical units.
    pub measured: Vec<f64>,
    pub initial_prediction: Vec<f64>,
    pub hybrid_prediction: Option<Vec<f64>>,
    pub timing: Timing,
}

/// Metrics-only view, stable across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n: usize,
    pub initial: Metrics,
    pub hybrid: Option<Metrics>,
}

impl EvalReport {
    /// The hybrid metrics when correction is active, else the initial ones.
    pub fn final_metrics(&self) -> &Metrics {
        self.hybrid.as_ref().unwrap_or(&self.initial)
    }

    pub fn final_prediction(&self) -> &[f64] {
        self.hybrid_prediction.as_deref().unwrap_or(&self.initial_prediction)
    }

    pub fn summary(&self) -> MetricsSummary {
        MetricsSummary {
            n: self.measured.len(),
            initial: self.initial,
            hybrid: self.hybrid,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per metric and model.
    pub fn write_metrics_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["model", "mse", "mae", "mape"])?;
        let mut row = |name: &str, m: &Metrics| {
            w.write_record([
                name.to_string(),
                format!("{:?}", m.mse),
                format!("{:?}", m.mae),
                m.mape.map_or(String::new(), |v| format!("{v:?}")),
            ])
        };
        row("initial", &self.initial)?;
        if let Some(h) = &self.hybrid {
            row("hybrid", h)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `measured,predicted` using the final prediction.
    pub fn write_predictions_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["measured", "predicted"])?;
        for (m, p) in self.measured.iter().zip(self.final_prediction()) {
            w.write_record([format!("{m:?}"), format!("{p:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Physical-unit report from normalized head outputs.
pub(crate) fn report(model: &PipelineModel, heads: &HeadOutputs, measured: Vec<f64>) -> Result<EvalReport> {
    let (lo, hi) = model.norm.bounds(model.schema.target())?;
    let phys = |v: &[f64]| v.iter().map(|&x| unscale(x, lo, hi)).collect::<Vec<_>>();
    let initial_prediction = phys(&heads.initial);
    let hybrid_prediction = heads.hybrid.as_deref().map(phys);
    Ok(EvalReport {
        initial: metrics(&measured, &initial_prediction)?,
        hybrid: hybrid_prediction
            .as_deref()
            .map(|h| metrics(&measured, h))
            .transpose()?,
        measured,
        initial_prediction,
        hybrid_prediction,
        timing: Timing {
            initial_seconds: heads.initial_seconds,
            hybrid_seconds: heads.hybrid_seconds,
        },
    })
}

/// Evaluates the model one step ahead on rows that continue its training data.
pub fn predict(model: &PipelineModel, table: &TimeSeriesTable) -> Result<EvalReport> {
    Ok(predict_detailed(model, table)?.0)
}

/// Like [`predict`], also returning the normalized initial output and the
/// correction series.
pub fn predict_detailed(
    model: &PipelineModel,
    table: &TimeSeriesTable,
) -> Result<(EvalReport, NormalizedOutputs)> {
    let (design, measured) = test_design(model, table)?;
    let heads = run_heads(
        &model.initial,
        model.ec.as_ref(),
        &design.x,
        &design.y,
        model.error_lags,
        model.config.feedback,
    )?;
    let rep = report(model, &heads, measured)?;
    let normalized = NormalizedOutputs {
        measured: design.y,
        initial: heads.initial,
        correction: heads.correction,
        hybrid: heads.hybrid,
    };
    Ok((rep, normalized))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedOutputs {
    pub measured: Vec<f64>,
    pub initial: Vec<f64>,
    pub correction: Option<Vec<f64>>,
    pub hybrid: Option<Vec<f64>>,
}

/// In-sample errors of the initial model and the correction model's fit on
/// the training design, both normalized and aligned to rows `t >= lags`.
/// Returns `(correction residual, hybrid residual)`.
pub fn training_residuals(
    model: &PipelineModel,
    train: &TimeSeriesTable,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let Some(ec) = &model.ec else {
        return Ok(None);
    };
    let normed = model.norm.apply(train)?;
    let aligned = reconstruct(&normed, &model.delays, model.schema.target())?;
    let modes = match &model.vmd {
        Some(v) => Some(prune_last_mode(&decompose(&v.train_signal, v.k, &model.config.vmd)?)?.modes),
        None => None,
    };
    let (design, _) = assemble(&aligned, &model.features, model.vmd.as_ref(), modes.as_deref())?;
    let lags = model.error_lags;
    let y_p = model.initial.predict(&design.x)?;
    let errors: Vec<f64> = design.y.iter().zip(y_p.iter()).map(|(m, p)| m - p).collect();
    let e_p = ec.predict(&correction_inputs(&design.x, &errors, lags))?;
    let ec_residual: Vec<f64> = errors[lags..].iter().zip(e_p.iter()).map(|(e, p)| e - p).collect();
    let hybrid_residual: Vec<f64> = (lags..design.y.len())
        .map(|t| design.y[t] - (y_p[t] + e_p[t - lags]))
        .collect();
    Ok(Some((ec_residual, hybrid_residual)))
}
