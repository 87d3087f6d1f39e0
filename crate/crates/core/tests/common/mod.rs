//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use scr_dynpredict::feature_select::TreeNode;

/// Exact fraction over `i128`, always normalized with a positive denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Frac {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0);
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Self {
            num: s * num / g,
            den: s * den / g,
        }
    }
    pub fn int(v: i128) -> Self {
        Self::new(v, 1)
    }
    pub fn add(self, o: Self) -> Self {
        Self::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }
    pub fn sub(self, o: Self) -> Self {
        self.add(Self::new(-o.num, o.den))
    }
    pub fn mul(self, o: Self) -> Self {
        Self::new(self.num * o.num, self.den * o.den)
    }
    pub fn div(self, o: Self) -> Self {
        Self::new(self.num * o.den, self.den * o.num)
    }
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
    pub fn cmp(self, o: Self) -> std::cmp::Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }
}

/// Exact variance-reduction gain `S_l²/n_l + S_r²/n_r − S²/n` for integer
/// targets.
fn exact_gain(left: &[i128], right: &[i128]) -> Frac {
    let sum = |v: &[i128]| v.iter().sum::<i128>();
    let term = |v: &[i128]| Frac::new(sum(v) * sum(v), v.len() as i128);
    let all: Vec<i128> = left.iter().chain(right).copied().collect();
    term(left).add(term(right)).sub(term(&all))
}

/// Every admissible split of a node: `(feature, threshold, exact gain)`.
/// Thresholds are midpoints of consecutive distinct values.
pub fn enumerate_splits(x: &[Vec<f64>], y: &[i128], idx: &[usize], min_leaf: usize) -> Vec<(usize, f64, Frac)> {
    let mut out = Vec::new();
    for (f, col) in x.iter().enumerate() {
        let mut values: Vec<f64> = idx.iter().map(|&i| col[i]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] <= thr);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let yl: Vec<i128> = l.iter().map(|&i| y[i]).collect();
            let yr: Vec<i128> = r.iter().map(|&i| y[i]).collect();
            out.push((f, thr, exact_gain(&yl, &yr)));
        }
    }
    out
}

/// Walks a fitted CART tree and re-derives every node by brute force.
/// Returns the exact importances `Σ gain / n_total` per feature.
pub fn check_cart(
    node: &TreeNode<f64>,
    x: &[Vec<f64>],
    y: &[i128],
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
    acc: &mut Vec<Frac>,
) {
    let n = idx.len();
    let splits = if depth >= max_depth || n < 2 * min_leaf {
        Vec::new()
    } else {
        enumerate_splits(x, y, &idx, min_leaf)
    };
    let best = splits
        .iter()
        .map(|s| s.2)
        .max_by(|a, b| a.cmp(*b))
        .filter(|g| g.num > 0);
    match (node, best) {
        (TreeNode::Leaf { n_samples, .. }, None) => assert_eq!(*n_samples, n),
        (
            TreeNode::Split {
                feature,
                threshold,
                n_samples,
                left,
                right,
                ..
            },
            Some(best),
        ) => {
            assert_eq!(*n_samples, n);
            let chosen = splits
                .iter()
                .find(|s| s.0 == *feature && s.1 == *threshold)
                .expect("split is one of the enumerated candidates");
            assert_eq!(chosen.2, best, "chosen split is not an exact argmax");
            acc[*feature] = acc[*feature].add(best);
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[*feature][i] <= *threshold);
            check_cart(left, x, y, l, depth + 1, max_depth, min_leaf, acc);
            check_cart(right, x, y, r, depth + 1, max_depth, min_leaf, acc);
        }
        (TreeNode::Leaf { .. }, Some(g)) => panic!("leaf where a split with gain {g:?} exists"),
        (TreeNode::Split { .. }, None) => panic!("split where no positive-gain split exists"),
    }
}

/// Plain per-formula recomputation of MAE, MSE and MAPE (percent).
pub fn metric_oracle(y: &[f64], p: &[f64]) -> (f64, f64, Option<f64>) {
    let n = y.len() as f64;
    let mut abs = Vec::new();
    let mut sq = Vec::new();
    let mut pct = Vec::new();
    for i in 0..y.len() {
        let d = y[i] - p[i];
        abs.push(if d < 0.0 { -d } else { d });
        sq.push(d * d);
        if y[i] != 0.0 {
            pct.push(abs[i] / y[i]);
        }
    }
    let total = |v: &Vec<f64>| v.iter().fold(0.0, |a, b| a + b);
    let mape = (pct.len() == y.len()).then(|| 100.0 * total(&pct) / n);
    (total(&abs) / n, total(&sq) / n, mape)
}

/// Periodogram `|Σ x_t e^{-2πi k t / n}|²` by direct summation.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
