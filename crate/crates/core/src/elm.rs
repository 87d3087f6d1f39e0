//! Extreme learning machine: a single hidden layer with random frozen
//! weights and least-squares output weights.

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalars the ELM solves in.
pub trait LinalgScalar: Real + RealField {}
impl<T: Real + RealField> LinalgScalar for T {}

/// Relative singular-value cutoff of the pseudoinverse.
pub const PINV_RCOND: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply<T: LinalgScalar>(self, z: T) -> T {
        match self {
            Activation::Tanh => Float::tanh(z),
            Activation::Sigmoid => T::one() / (T::one() + Float::exp(-z)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElmConfig {
    pub hidden: usize,
    pub activation: Activation,
    /// Tikhonov weight; zero solves with the pseudoinverse.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for ElmConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            activation: Activation::Tanh,
            ridge: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "ElmRepr<T>",
    try_from = "ElmRepr<T>",
    bound(serialize = "T: LinalgScalar", deserialize = "T: LinalgScalar")
)]
pub struct ElmModel<T: LinalgScalar> {
    /// `L × d`, one row per hidden neuron.
    pub input_weights: DMatrix<T>,
    pub biases: DVector<T>,
    /// `L × m`.
    pub beta: DMatrix<T>,
    pub activation: Activation,
    pub seed: u64,
    pub ridge: f64,
}

impl<T: LinalgScalar> ElmModel<T> {
    pub fn hidden(&self) -> usize {
        self.input_weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.beta.ncols()
    }

    /// Hidden-layer output `H = g(X Wᵀ + b)`, `N × L`.
    pub fn hidden_output(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut h = x * self.input_weights.transpose();
        for mut row in h.row_iter_mut() {
            for (v, &b) in row.iter_mut().zip(self.biases.iter()) {
                *v = self.activation.apply(*v + b);
            }
        }
        Ok(h)
    }

    pub fn predict(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        Ok(self.hidden_output(x)? * &self.beta)
    }

    /// Same hidden layer with scaled output weights.
    pub fn with_beta(&self, beta: DMatrix<T>) -> Result<Self> {
        if beta.shape() != self.beta.shape() {
            return Err(Error::Dimension {
                expected: self.beta.len(),
                got: beta.len(),
            });
        }
        Ok(Self { beta, ..self.clone() })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Draws the hidden layer neuron by neuron (weights, then bias), uniform on
/// `[-1, 1]`. Growing `hidden` keeps the earlier neurons unchanged.
fn random_hidden<T: LinalgScalar>(hidden: usize, dim: usize, seed: u64) -> (DMatrix<T>, DVector<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(hidden, dim);
    let mut b = DVector::zeros(hidden);
    for i in 0..hidden {
        for j in 0..dim {
            w[(i, j)] = T::lit(rng.random_range(-1.0..=1.0));
        }
        b[i] = T::lit(rng.random_range(-1.0..=1.0));
    }
    (w, b)
}

pub fn train<T: LinalgScalar>(x: &DMatrix<T>, targets: &DMatrix<T>, cfg: &ElmConfig) -> Result<ElmModel<T>> {
    if x.nrows() == 0 {
        return Err(Error::NoRows);
    }
    if cfg.hidden == 0 {
        return Err(Error::invalid("hidden layer needs at least one neuron"));
    }
    if targets.nrows() != x.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: targets.nrows(),
        });
    }
    if !(cfg.ridge >= 0.0) {
        return Err(Error::invalid("ridge must be non-negative"));
    }
    if x.iter().chain(targets.iter()).any(|v| !Float::is_finite(*v)) {
        return Err(Error::NonFinite("ELM training data"));
    }
    let (input_weights, biases) = random_hidden(cfg.hidden, x.ncols(), cfg.seed);
    let mut model = ElmModel {
        input_weights,
        biases,
        beta: DMatrix::zeros(cfg.hidden, targets.ncols()),
        activation: cfg.activation,
        seed: cfg.seed,
        ridge: cfg.ridge,
    };
    let h = model.hidden_output(x)?;
    model.beta = if cfg.ridge > 0.0 {
        ridge_solve(&h, targets, T::lit(cfg.ridge)).unwrap_or_else(|| pinv_solve(&h, targets))
    } else {
        pinv_solve(&h, targets)
    };
    Ok(model)
}

/// `H† T` with singular values below `PINV_RCOND · σ_max` discarded.
pub fn pinv_solve<T: LinalgScalar>(h: &DMatrix<T>, t: &DMatrix<T>) -> DMatrix<T> {
    let svd = h.clone().svd(true, true);
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested Vᵀ"));
    let s = svd.singular_values;
    let s_max = s.iter().copied().fold(T::zero(), Float::max);
    let eps_floor = <T as Float>::epsilon() * T::from_count(h.nrows().max(h.ncols()));
    let cutoff = s_max * Float::max(T::lit(PINV_RCOND), eps_floor);
    let mut ut_t = u.transpose() * t;
    for (i, mut row) in ut_t.row_iter_mut().enumerate() {
        let si = s[i];
        let inv = if si > cutoff { T::one() / si } else { T::zero() };
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    v_t.transpose() * ut_t
}

/// `(HᵀH + r I)⁻¹ HᵀT` by Cholesky; `None` if the system is not positive definite.
fn ridge_solve<T: LinalgScalar>(h: &DMatrix<T>, t: &DMatrix<T>, ridge: T) -> Option<DMatrix<T>> {
    let ht = h.transpose();
    let mut gram = &ht * h;
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
    let chol = gram.cholesky()?;
    Some(chol.solve(&(ht * t)))
}

/// Builds an `N × d` matrix from row vectors.
pub fn matrix_from_rows<T: LinalgScalar>(rows: &[Vec<T>], cols: usize) -> Result<DMatrix<T>> {
    if let Some(r) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::Dimension {
            expected: cols,
            got: r.len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: LinalgScalar", deserialize = "T: LinalgScalar"))]
struct ElmRepr<T> {
    input_dim: usize,
    hidden: usize,
    output_dim: usize,
    seed: u64,
    activation: Activation,
    ridge: f64,
    /// Row-major `hidden × input_dim`.
    input_weights: Vec<T>,
    biases: Vec<T>,
    /// Row-major `hidden × output_dim`.
    beta: Vec<T>,
}

impl<T: LinalgScalar> From<ElmModel<T>> for ElmRepr<T> {
    fn from(m: ElmModel<T>) -> Self {
        let row_major = |a: &DMatrix<T>| a.transpose().as_slice().to_vec();
        Self {
            input_dim: m.input_dim(),
            hidden: m.hidden(),
            output_dim: m.output_dim(),
            seed: m.seed,
            activation: m.activation,
            ridge: m.ridge,
            input_weights: row_major(&m.input_weights),
            biases: m.biases.as_slice().to_vec(),
            beta: row_major(&m.beta),
        }
    }
}

impl<T: LinalgScalar> TryFrom<ElmRepr<T>> for ElmModel<T> {
    type Error = String;

    fn try_from(r: ElmRepr<T>) -> std::result::Result<Self, String> {
        if r.input_weights.len() != r.hidden * r.input_dim
            || r.biases.len() != r.hidden
            || r.beta.len() != r.hidden * r.output_dim
        {
            return Err("ELM matrix sizes do not match the declared dimensions".into());
        }
        Ok(Self {
            input_weights: DMatrix::from_row_slice(r.hidden, r.input_dim, &r.input_weights),
            biases: DVector::from_vec(r.biases),
            beta: DMatrix::from_row_slice(r.hidden, r.output_dim, &r.beta),
            activation: r.activation,
            seed: r.seed,
            ridge: r.ridge,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_inputs(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn zero_target_gives_zero_beta() {
        let x = random_inputs(30, 3, 1);
        let m = train(&x, &DMatrix::zeros(30, 1), &ElmConfig::default()).unwrap();
        assert!(m.beta.iter().all(|&v| v == 0.0));
        assert!(m.predict(&x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_beta_predicts_zero() {
        let x = random_inputs(5, 2, 2);
        let cfg = ElmConfig {
            hidden: 1,
            ..ElmConfig::default()
        };
        let m = train(&x, &DMatrix::from_element(5, 1, 1.0), &cfg).unwrap();
        let m = m.with_beta(DMatrix::zeros(1, 1)).unwrap();
        assert!(m.predict(&x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_is_linear_in_beta() {
        let x = random_inputs(40, 3, 3);
        let t = DMatrix::from_fn(40, 1, |i, _| (i as f64 * 0.1).sin());
        let m = train(&x, &t, &ElmConfig::default()).unwrap();
        let y = m.predict(&x).unwrap();
        let y2 = m.with_beta(&m.beta * 2.0).unwrap().predict(&x).unwrap();
        for (a, b) in y.iter().zip(y2.iter()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let x = random_inputs(10, 3, 4);
        let t = DMatrix::zeros(10, 1);
        let m = train(&x, &t, &ElmConfig::default()).unwrap();
        assert!(m.predict(&random_inputs(4, 2, 5)).is_err());
        let mut bad = x.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(train(&bad, &t, &ElmConfig::default()).is_err());
        assert!(train(&x, &DMatrix::zeros(9, 1), &ElmConfig::default()).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let x = random_inputs(25, 4, 6);
        let t = DMatrix::from_fn(25, 2, |i, j| (i * (j + 1)) as f64 * 0.01);
        let m = train(&x, &t, &ElmConfig { hidden: 7, ..ElmConfig::default() }).unwrap();
        let back = ElmModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn runs_in_single_precision() {
        let x = DMatrix::<f32>::from_fn(20, 2, |i, j| ((i + j) % 7) as f32 / 7.0);
        let t = DMatrix::<f32>::from_fn(20, 1, |i, _| (i as f32 * 0.2).cos());
        let m = train(&x, &t, &ElmConfig { hidden: 10, ridge: 0.0, ..ElmConfig::default() }).unwrap();
        assert_eq!(m.predict(&x).unwrap().shape(), (20, 1));
    }
}
