//! Stagewise squared-loss boosting with second-order split gain.

use serde::{Deserialize, Serialize};

use super::tree::{Columns, Grower, SplitCriterion, TreeNode, TreeParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 4,
            lambda: 1.0,
            min_leaf: 1,
        }
    }
}

/// Gradients `g = ŷ − y` with unit hessians.
struct SecondOrder<'a, T> {
    grad: &'a [T],
    lambda: T,
}

impl<T: Real> SplitCriterion<T> for SecondOrder<'_, T> {
    fn grad(&self, i: usize) -> T {
        self.grad[i]
    }
    fn gain(&self, gl: T, hl: T, gr: T, hr: T, g: T, h: T) -> T {
        let l = self.lambda;
        gl * gl / (hl + l) + gr * gr / (hr + l) - g * g / (h + l)
    }
    fn leaf_value(&self, idx: &[usize]) -> T {
        let g: T = idx.iter().map(|&i| self.grad[i]).sum();
        -g / (T::from_count(idx.len()) + self.lambda)
    }
    fn decrease(&self, gain: T, _n_node: usize) -> T {
        gain
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostedModel<T> {
    pub base_score: T,
    pub learning_rate: T,
    pub trees: Vec<TreeNode<T>>,
    /// Total split gain per feature over all rounds.
    pub gain: Vec<T>,
    /// Mean squared training loss before any round, then after each round.
    pub loss_history: Vec<T>,
}

impl<T: Real> BoostedModel<T> {
    pub fn predict_row(&self, row: &[T]) -> T {
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + self.learning_rate * t.predict(|f| row[f]))
    }
}

pub fn fit_boosted<T: Real>(x: &[Vec<T>], y: &[T], params: BoostParams) -> Result<BoostedModel<T>> {
    if !(params.learning_rate > 0.0) {
        return Err(Error::invalid("learning_rate must be positive"));
    }
    if params.n_rounds == 0 {
        return Err(Error::invalid("boosting needs at least one round"));
    }
    if params.lambda < 0.0 {
        return Err(Error::invalid("lambda must be non-negative"));
    }
    let cols = Columns::new(x, y.len())?;
    let n = y.len();
    let p = cols.n_features();
    let eta = T::lit(params.learning_rate);
    let base_score = y.iter().copied().sum::<T>() / T::from_count(n);
    let mut pred = vec![base_score; n];
    let mut gain = vec![T::zero(); p];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let loss = |pred: &[T]| {
        pred.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / T::from_count(n)
    };
    let mut loss_history = vec![loss(&pred)];
    // The grower only draws randomness when subsampling features, which boosting never does.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };

    for _ in 0..params.n_rounds {
        let grad: Vec<T> = pred.iter().zip(y).map(|(&p, &t)| p - t).collect();
        let grower = Grower {
            x: cols,
            criterion: SecondOrder {
                grad: &grad,
                lambda: T::lit(params.lambda),
            },
            params: tree_params,
            max_features: usize::MAX,
        };
        let tree = grower.grow((0..n).collect(), &mut rng);
        for (g, s) in gain.iter_mut().zip(tree_importance_raw(&tree, p)) {
            *g += s;
        }
        for (i, pr) in pred.iter_mut().enumerate() {
            *pr += eta * tree.predict(|f| cols.get(i, f));
        }
        loss_history.push(loss(&pred));
        trees.push(tree);
    }
    Ok(BoostedModel {
        base_score,
        learning_rate: eta,
        trees,
        gain,
        loss_history,
    })
}

/// Unweighted sum of split gains per feature.
fn tree_importance_raw<T: Real>(root: &TreeNode<T>, p: usize) -> Vec<T> {
    let mut s = vec![T::zero(); p];
    root.for_each_split(&mut |f, _, g, _| s[f] += g);
    s
}

/// Raw boosted importances: total split gain per feature.
pub fn fit_gbt_importance<T: Real>(x: &[Vec<T>], y: &[T], params: BoostParams) -> Result<Vec<T>> {
    Ok(fit_boosted(x, y, params)?.gain)
}
