//! Tree-ensemble feature importances and their combination.

mod boost;
mod forest;
mod importance;
mod tree;

pub use boost::{fit_boosted, fit_gbt_importance, BoostParams, BoostedModel};
pub use forest::{fit_forest_importance, ForestParams};
pub use importance::{
    combine_importance, compute_importance, min_max_scale, select_features, FeatureImportance,
    ImportanceReport, SelectionConfig,
};
pub use tree::{fit_cart_importance, tree_importance, RegressionTree, TreeNode, TreeParams};
