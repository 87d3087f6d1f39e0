//! Regression trees grown by exhaustive split search.
//!
//! One grower serves both CART (variance reduction) and the boosted learner
//! (second-order gain). A split candidate sits at the midpoint between two
//! consecutive distinct values of a feature.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<T> {
    Leaf {
        value: T,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: T,
        /// Weighted drop in node impurity (CART) or split gain (boosting).
        impurity_decrease: T,
        n_samples: usize,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
}

impl<T: Real> TreeNode<T> {
    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Leaf { n_samples, .. } | TreeNode::Split { n_samples, .. } => *n_samples,
        }
    }

    pub fn impurity_decrease(&self) -> T {
        match self {
            TreeNode::Leaf { .. } => T::zero(),
            TreeNode::Split { impurity_decrease, .. } => *impurity_decrease,
        }
    }

    pub fn predict(&self, row: impl Fn(usize) -> T) -> T {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row(*feature) <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Visits every split node as `(feature, threshold, impurity_decrease, n_samples)`.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, T, T, usize)) {
        if let TreeNode::Split {
            feature,
            threshold,
            impurity_decrease,
            n_samples,
            left,
            right,
        } = self
        {
            f(*feature, *threshold, *impurity_decrease, *n_samples);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Column-major design matrix borrowed from the caller.
#[derive(Clone, Copy, Debug)]
pub struct Columns<'a, T> {
    cols: &'a [Vec<T>],
}

impl<'a, T: Real> Columns<'a, T> {
    pub fn new(cols: &'a [Vec<T>], n_rows: usize) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::invalid("design matrix has no features"));
        }
        if n_rows == 0 {
            return Err(Error::NoRows);
        }
        if let Some(c) = cols.iter().find(|c| c.len() != n_rows) {
            return Err(Error::Dimension {
                expected: n_rows,
                got: c.len(),
            });
        }
        if cols.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tree design matrix"));
        }
        Ok(Self { cols })
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, row: usize, feature: usize) -> T {
        self.cols[feature][row]
    }
}

/// How a node's split is scored and its leaf valued.
pub(crate) trait SplitCriterion<T: Real> {
    /// Per-sample statistic accumulated on each side.
    fn grad(&self, i: usize) -> T;
    /// Gain of splitting `(g, h)` into `(gl, hl)` and `(g - gl, h - hl)`.
    fn gain(&self, gl: T, hl: T, gr: T, hr: T, g: T, h: T) -> T;
    fn leaf_value(&self, idx: &[usize]) -> T;
    /// Stored `impurity_decrease` for a split with the given gain.
    fn decrease(&self, gain: T, n_node: usize) -> T;
    /// Makes per-node statistics numerically friendly (e.g. centering).
    fn prepare(&self, _idx: &[usize]) -> T {
        T::zero()
    }
}

/// Squared-error impurity: gain is the drop in node SSE.
pub(crate) struct Variance<'a, T> {
    pub y: &'a [T],
}

impl<T: Real> SplitCriterion<T> for Variance<'_, T> {
    fn grad(&self, i: usize) -> T {
        self.y[i]
    }
    fn gain(&self, gl: T, hl: T, gr: T, hr: T, g: T, h: T) -> T {
        gl * gl / hl + gr * gr / hr - g * g / h
    }
    fn leaf_value(&self, idx: &[usize]) -> T {
        idx.iter().map(|&i| self.y[i]).sum::<T>() / T::from_count(idx.len())
    }
    fn decrease(&self, gain: T, n_node: usize) -> T {
        gain / T::from_count(n_node)
    }
    fn prepare(&self, idx: &[usize]) -> T {
        self.leaf_value(idx)
    }
}

pub(crate) struct Grower<'a, T, C> {
    pub x: Columns<'a, T>,
    pub criterion: C,
    pub params: TreeParams,
    pub max_features: usize,
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

impl<T: Real, C: SplitCriterion<T>> Grower<'_, T, C> {
    pub fn grow<R: Rng + ?Sized>(&self, idx: Vec<usize>, rng: &mut R) -> TreeNode<T> {
        self.grow_node(idx, 0, rng)
    }

    fn grow_node<R: Rng + ?Sized>(&self, idx: Vec<usize>, depth: usize, rng: &mut R) -> TreeNode<T> {
        let n = idx.len();
        let leaf = |idx: &[usize]| TreeNode::Leaf {
            value: self.criterion.leaf_value(idx),
            n_samples: idx.len(),
        };
        let min_leaf = self.params.min_leaf.max(1);
        if depth >= self.params.max_depth || n < 2 * min_leaf {
            return leaf(&idx);
        }
        let features = self.candidate_features(rng);
        let Some(best) = self.best_split(&idx, &features, min_leaf) else {
            return leaf(&idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x.get(i, best.feature) <= best.threshold);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            impurity_decrease: self.criterion.decrease(best.gain, n),
            n_samples: n,
            left: Box::new(self.grow_node(l, depth + 1, rng)),
            right: Box::new(self.grow_node(r, depth + 1, rng)),
        }
    }

    fn candidate_features<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let p = self.x.n_features();
        if self.max_features >= p {
            return (0..p).collect();
        }
        let mut f = sample(rng, p, self.max_features.max(1)).into_vec();
        f.sort_unstable();
        f
    }

    fn best_split(&self, idx: &[usize], features: &[usize], min_leaf: usize) -> Option<BestSplit<T>> {
        let n = idx.len();
        let shift = self.criterion.prepare(idx);
        let stat = |i: usize| self.criterion.grad(i) - shift;
        let g_total: T = idx.iter().map(|&i| stat(i)).sum();
        let h_total = T::from_count(n);
        let mut best: Option<BestSplit<T>> = None;
        let mut order = idx.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| {
                self.x
                    .get(a, f)
                    .partial_cmp(&self.x.get(b, f))
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut gl = T::zero();
            for k in 0..n - 1 {
                gl += stat(order[k]);
                let left_n = k + 1;
                if left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let a = self.x.get(order[k], f);
                let b = self.x.get(order[k + 1], f);
                if !(a < b) {
                    continue;
                }
                let hl = T::from_count(left_n);
                let gain = self
                    .criterion
                    .gain(gl, hl, g_total - gl, h_total - hl, g_total, h_total);
                if gain > T::zero() && best.as_ref().is_none_or(|bs| gain > bs.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: (a + b) / T::lit(2.0),
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Sums `(n_node / n_total) · impurity_decrease` per feature.
pub fn tree_importance<T: Real>(root: &TreeNode<T>, n_features: usize) -> Vec<T> {
    let n_total = T::from_count(root.n_samples());
    let mut scores = vec![T::zero(); n_features];
    root.for_each_split(&mut |f, _, dec, n| {
        scores[f] += T::from_count(n) / n_total * dec;
    });
    scores
}

/// A fitted CART regression tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T> {
    pub root: TreeNode<T>,
    pub n_features: usize,
}

impl<T: Real> RegressionTree<T> {
    pub fn fit(x: &[Vec<T>], y: &[T], params: TreeParams) -> Result<Self> {
        let cols = Columns::new(x, y.len())?;
        // All features are scanned, so the generator is never drawn from.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        Ok(Self::fit_rows(cols, y, (0..y.len()).collect(), params, usize::MAX, &mut rng))
    }

    pub(crate) fn fit_rows<R: Rng + ?Sized>(
        x: Columns<'_, T>,
        y: &[T],
        rows: Vec<usize>,
        params: TreeParams,
        max_features: usize,
        rng: &mut R,
    ) -> Self {
        let grower = Grower {
            x,
            criterion: Variance { y },
            params,
            max_features,
        };
        Self {
            root: grower.grow(rows, rng),
            n_features: x.n_features(),
        }
    }

    pub fn importance(&self) -> Vec<T> {
        tree_importance(&self.root, self.n_features)
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        self.root.predict(|f| row[f])
    }
}

/// Raw CART importances of each feature column for target `y`.
pub fn fit_cart_importance<T: Real>(x: &[Vec<T>], y: &[T], params: TreeParams) -> Result<Vec<T>> {
    Ok(RegressionTree::fit(x, y, params)?.importance())
}
