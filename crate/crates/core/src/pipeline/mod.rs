//! End-to-end hybrid predictor: fitting, evaluation, ablation and
//! sensitivity analysis.

mod ablate;
mod config;
mod metrics;
mod model;
mod sensitivity;
mod tune;

pub use ablate::{ablate, grid, AblationReport, AblationRow};
pub use config::{forest_seed, ElmSettings, ErrorFeedback, PipelineConfig, Stages};
pub use metrics::{metrics, Metrics};
pub use model::{
    fit, fit_staged, predict, predict_detailed, training_residuals, EvalReport, MetricsSummary, NormalizedOutputs,
    PipelineModel, StageOverrides, Timing, VmdState,
};
pub use sensitivity::{sensitivity, SensitivityReport, SensitivityRow};
pub use tune::{default_hidden_grid, hidden_grid, tune_hidden, HiddenSearch};
