//! Delay-aware hybrid prediction of SCR outlet NOx.
//!
//! The chain runs outlier cleaning, MIC-based delay reconstruction,
//! tree-ensemble feature selection, variational mode decomposition of the
//! dominant driver, an extreme learning machine, and an error-correction
//! network fed with lagged one-step errors.
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`); table handling
//! and the pipeline work in `f64`. The aliases below name the `f64` forms.

pub mod cli;
pub mod dataset;
pub mod elm;
pub mod error;
pub mod feature_select;
pub mod mic_delay;
pub mod pipeline;
pub mod scalar;
pub mod vmd;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Elm = elm::ElmModel<f64>;
pub type Modes = vmd::ModeSet<f64>;
pub type ModeCount = vmd::ModeSelection<f64>;
pub type Mic = mic_delay::MicScore<f64>;
pub type Grid = mic_delay::GridPartition<f64>;
pub type Tree = feature_select::RegressionTree<f64>;
pub type Booster = feature_select::BoostedModel<f64>;
