//! Maximal information coefficient and MIC-driven delay reconstruction.

mod delay;
mod mic;

pub use delay::{
    estimate_delay, estimate_delays, lag_profile, reconstruct, DelayConfig, DelayEntry, DelayMap,
};
pub use mic::{
    cell_budget, grid_shapes, mic, mutual_information, GridPartition, MicScore, DEFAULT_B_EXPONENT,
    MIN_SAMPLES,
};
