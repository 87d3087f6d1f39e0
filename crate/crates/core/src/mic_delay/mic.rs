//! Grid mutual information and the maximal information coefficient.
//!
//! Grids use equal-frequency (rank) bins on both axes for every admissible
//! shape, so the score depends on the data only through ranks.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest sample size accepted by [`mic`].
pub const MIN_SAMPLES: usize = 20;
pub const DEFAULT_B_EXPONENT: f64 = 0.6;

/// Occupancy of an `nx × ny` grid, row-major (`x` bins index rows).
#[derive(Clone, Debug, PartialEq)]
pub struct GridPartition<T> {
    pub x_edges: Vec<T>,
    pub y_edges: Vec<T>,
    counts: Vec<u64>,
    nx: usize,
    ny: usize,
}

impl<T: Real> GridPartition<T> {
    /// Grid from explicit counts; edges are bin indices.
    pub fn from_counts(counts: &[Vec<u64>]) -> Result<Self> {
        let nx = counts.len();
        let ny = counts.first().map_or(0, Vec::len);
        if nx == 0 || ny == 0 || counts.iter().any(|r| r.len() != ny) {
            return Err(Error::invalid("grid counts must be a non-empty rectangle"));
        }
        Ok(Self {
            x_edges: (0..=nx).map(T::from_count).collect(),
            y_edges: (0..=ny).map(T::from_count).collect(),
            counts: counts.iter().flatten().copied().collect(),
            nx,
            ny,
        })
    }

    /// Equal-frequency grid of the given shape. `x_edges[i]` is the smallest
    /// value falling in x-bin `i` (the last edge is the maximum).
    pub fn equal_frequency(x: &[T], y: &[T], nx: usize, ny: usize) -> Result<Self> {
        check_pair(x, y, 1)?;
        if nx < 2 || ny < 2 {
            return Err(Error::invalid("grids need at least two bins per axis"));
        }
        let rx = RankBins::new(x, nx);
        let ry = RankBins::new(y, ny);
        let counts = joint_counts(rx.bins(nx), ry.bins(ny), ny, nx * ny);
        Ok(Self {
            x_edges: rx.edges(x, nx),
            y_edges: ry.edges(y, ny),
            counts,
            nx,
            ny,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.ny + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Mutual information of a grid in bits; empty cells contribute nothing.
pub fn mutual_information<T: Real>(grid: &GridPartition<T>) -> T {
    mi_bits(&grid.counts, grid.nx, grid.ny)
}

/// Result of a MIC evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MicScore<T> {
    pub value: T,
    /// Set when either series is constant; `value` is then zero.
    pub constant_input: bool,
}

/// `B(n) = floor(n^exponent)`, the cap on the number of grid cells.
pub fn cell_budget(n: usize, b_exponent: f64) -> usize {
    (n as f64).powf(b_exponent).floor() as usize
}

/// Grid shapes searched for `n` samples: `nx, ny` in `[2, B/2]`, `nx·ny < B`.
pub fn grid_shapes(n: usize, b_exponent: f64) -> Vec<(usize, usize)> {
    let b = cell_budget(n, b_exponent);
    let max_bins = b / 2;
    let mut shapes = Vec::new();
    for nx in 2..=max_bins {
        for ny in 2..=max_bins {
            if nx * ny < b {
                shapes.push((nx, ny));
            }
        }
    }
    shapes
}

/// Maximal information coefficient of two equally long series.
pub fn mic<T: Real>(x: &[T], y: &[T], b_exponent: f64) -> Result<MicScore<T>> {
    check_pair(x, y, MIN_SAMPLES)?;
    let shapes = grid_shapes(x.len(), b_exponent);
    let max_bins = shapes.iter().map(|s| s.0).max().unwrap_or(0);
    if shapes.is_empty() {
        return Err(Error::invalid(format!(
            "no admissible grid for n = {} at exponent {b_exponent}",
            x.len()
        )));
    }
    let rx = RankBins::new(x, max_bins);
    let ry = RankBins::new(y, max_bins);
    Ok(mic_prepared(&rx, &ry, &shapes))
}

fn check_pair<T: Real>(x: &[T], y: &[T], min_len: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < min_len {
        return Err(Error::invalid(format!(
            "need at least {min_len} samples, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("MIC input"));
    }
    Ok(())
}

/// MIC over the given shapes for series whose bins are already computed.
pub(crate) fn mic_prepared<T: Real>(
    rx: &RankBins,
    ry: &RankBins,
    shapes: &[(usize, usize)],
) -> MicScore<T> {
    if rx.constant || ry.constant {
        return MicScore {
            value: T::zero(),
            constant_input: true,
        };
    }
    let mut best = T::zero();
    let mut counts = Vec::new();
    for &(nx, ny) in shapes {
        counts.clear();
        counts.resize(nx * ny, 0u64);
        for (&bx, &by) in rx.bins(nx).iter().zip(ry.bins(ny)) {
            counts[bx as usize * ny + by as usize] += 1;
        }
        let mi: T = mi_bits(&counts, nx, ny);
        let score = mi / T::from_count(nx.min(ny)).log2();
        if score > best {
            best = score;
        }
    }
    MicScore {
        value: best.min(T::one()),
        constant_input: false,
    }
}

fn joint_counts(bx: &[u16], by: &[u16], ny: usize, cells: usize) -> Vec<u64> {
    let mut counts = vec![0u64; cells];
    for (&a, &b) in bx.iter().zip(by) {
        counts[a as usize * ny + b as usize] += 1;
    }
    counts
}

/// `Σ p(x,y) log2(p(x,y) / (p(x) p(y)))` from integer counts. Terms are
/// summed in sorted order so a transposed grid gives the identical value.
fn mi_bits<T: Real>(counts: &[u64], nx: usize, ny: usize) -> T {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return T::zero();
    }
    let mut rows = vec![0u64; nx];
    let mut cols = vec![0u64; ny];
    for i in 0..nx {
        for j in 0..ny {
            let c = counts[i * ny + j];
            rows[i] += c;
            cols[j] += c;
        }
    }
    let nf = T::from_u64(n).expect("count");
    let mut terms: Vec<T> = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let c = counts[i * ny + j];
            if c == 0 {
                continue;
            }
            let cf = T::from_u64(c).expect("count");
            let ratio = T::from_u64(c * n).expect("count") / T::from_u64(rows[i] * cols[j]).expect("count");
            terms.push(cf / nf * ratio.log2());
        }
    }
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mi: T = terms.into_iter().sum();
    mi.max(T::zero())
}

/// Equal-frequency bin assignments of one series for every bin count up to
/// `max_bins`. Tied values share a bin (their minimum rank decides).
pub(crate) struct RankBins {
    min_rank: Vec<usize>,
    order: Vec<usize>,
    per_count: Vec<Vec<u16>>,
    constant: bool,
}

impl RankBins {
    pub(crate) fn new<T: Real>(x: &[T], max_bins: usize) -> Self {
        let n = x.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
        let mut min_rank = vec![0usize; n];
        let mut start = 0;
        for r in 0..n {
            if r > 0 && x[order[r]] != x[order[r - 1]] {
                start = r;
            }
            min_rank[order[r]] = start;
        }
        let constant = n == 0 || x[order[0]] == x[order[n - 1]];
        let per_count = (0..=max_bins.max(1))
            .map(|nb| {
                if nb < 2 {
                    Vec::new()
                } else {
                    min_rank.iter().map(|&r| (r * nb / n) as u16).collect()
                }
            })
            .collect();
        Self {
            min_rank,
            order,
            per_count,
            constant,
        }
    }

    pub(crate) fn bins(&self, nb: usize) -> &[u16] {
        &self.per_count[nb]
    }

    fn edges<T: Real>(&self, x: &[T], nb: usize) -> Vec<T> {
        let n = x.len();
        let mut edges = vec![T::nan(); nb + 1];
        for &i in self.order.iter().rev() {
            edges[self.min_rank[i] * nb / n] = x[i];
        }
        edges[nb] = x[self.order[n - 1]];
        // Bins emptied by ties inherit the next edge.
        for b in (0..nb).rev() {
            if edges[b].is_nan() {
                edges[b] = edges[b + 1];
            }
        }
        edges
    }
}
