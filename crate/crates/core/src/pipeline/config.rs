use serde::{Deserialize, Serialize};

use crate::elm::{Activation, ElmConfig};
use crate::feature_select::SelectionConfig;
use crate::mic_delay::DelayConfig;
use crate::vmd::{ModeCountConfig, VmdConfig};

/// Stage switches used by the ablation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Stages {
    pub delay: bool,
    pub select: bool,
    pub vmd: bool,
    pub ec: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            delay: true,
            select: true,
            vmd: true,
            ec: true,
        }
    }
}

/// Source of the lagged errors fed to the correction model at test time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorFeedback {
    /// Realized errors from the measured target (one-step-ahead).
    Measured,
    /// The correction model's own earlier outputs.
    Recursive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElmSettings {
    pub hidden: usize,
    pub activation: Activation,
    pub ridge: f64,
}

impl Default for ElmSettings {
    fn default() -> Self {
        let d = ElmConfig::default();
        Self {
            hidden: d.hidden,
            activation: d.activation,
            ridge: d.ridge,
        }
    }
}

impl ElmSettings {
    pub fn with_seed(&self, seed: u64) -> ElmConfig {
        ElmConfig {
            hidden: self.hidden,
            activation: self.activation,
            ridge: self.ridge,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub stages: Stages,
    pub delay: DelayConfig,
    pub selection: SelectionConfig,
    /// Column decomposed into modes.
    pub decompose_label: String,
    pub vmd: VmdConfig,
    pub mode_count: ModeCountConfig,
    pub elm: ElmSettings,
    pub ec_elm: ElmSettings,
    /// Lagged errors fed to the correction model.
    pub error_lags: usize,
    pub feedback: ErrorFeedback,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            stages: Stages::default(),
            delay: DelayConfig::default(),
            selection: SelectionConfig::default(),
            decompose_label: "Q".to_string(),
            vmd: VmdConfig::default(),
            mode_count: ModeCountConfig::default(),
            elm: ElmSettings::default(),
            ec_elm: ElmSettings::default(),
            error_lags: 3,
            feedback: ErrorFeedback::Measured,
        }
    }
}

/// Independent stream seeds derived from the single run seed (splitmix64).
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random forest used by feature selection for a run seed.
pub fn forest_seed(seed: u64) -> u64 {
    derive_seed(seed, FOREST_STREAM)
}

pub(crate) const FOREST_STREAM: u64 = 1;
pub(crate) const INITIAL_STREAM: u64 = 2;
pub(crate) const EC_STREAM: u64 = 3;
