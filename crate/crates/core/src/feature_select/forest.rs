use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Columns, RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features drawn per split; `None` means `ceil(sqrt(p))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

/// Mean per-tree CART importance over a bagged, feature-subsampled forest.
///
/// Each tree draws from its own generator seeded from the master seed, so the
/// result does not depend on how trees are scheduled across threads.
pub fn fit_forest_importance<T: Real>(x: &[Vec<T>], y: &[T], params: &ForestParams) -> Result<Vec<T>> {
    if params.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let cols = Columns::new(x, y.len())?;
    let p = cols.n_features();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p);
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| master.next_u64()).collect();
    let n = y.len();

    let per_tree: Vec<Vec<T>> = seeds
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            RegressionTree::fit_rows(cols, y, rows, params.tree, max_features, &mut rng).importance()
        })
        .collect();

    let k = T::from_count(per_tree.len());
    let mut mean = vec![T::zero(); p];
    for scores in &per_tree {
        for (m, &s) in mean.iter_mut().zip(scores) {
            *m += s;
        }
    }
    Ok(mean.into_iter().map(|s| s / k).collect())
}
