//! Ingestion, cleaning, normalization, splitting and synthesis of operating data.

mod clean;
mod normalize;
mod schema;
mod synth;
mod table;

pub use clean::{clean_column, clean_outliers, DEFAULT_LOOKBACK, DEFAULT_SIGMA_K};
pub use normalize::{column_bounds, denormalize, normalize, scale, unscale, NormParams};
pub use schema::{Schema, VariableGroup, VariableSchema};
pub use synth::{generate_synthetic, GroundTruth, SynthConfig, IRRELEVANT, RELEVANT};
pub use table::{load_table, read_header, read_table, split, TimeSeriesTable, DEFAULT_SAMPLE_PERIOD};
