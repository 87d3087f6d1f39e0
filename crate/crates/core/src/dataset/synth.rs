//! Synthetic plant surrogate with known delays, drivers and tones.
//!
//! Every input is generated as a standardized latent series, the target is a
//! nonlinear function of delayed drivers plus an AR(1) residual and white
//! noise, and finally each column is mapped affinely onto its reference range.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::normalize::column_bounds;
use super::schema::Schema;
use super::table::{TimeSeriesTable, DEFAULT_SAMPLE_PERIOD};
use crate::error::{Error, Result};
use crate::scalar::{mean, variance};

/// Drivers of the synthetic target with their weights, strongest first.
pub const RELEVANT: [(&str, f64); 8] = [
    ("Q", 1.0),
    ("Tout", 0.72),
    ("Tin", 0.68),
    ("TA", 0.66),
    ("O2in", 0.70),
    ("Ne", 0.64),
    ("O2out", 0.64),
    ("NOx", 0.70),
];

/// Candidates that never enter the target.
pub const IRRELEVANT: [&str; 7] = ["CO", "F", "Pin", "3AB", "Pout", "NH3", "TF"];

fn default_delays() -> BTreeMap<String, usize> {
    [
        ("Q", 44),
        ("NOx", 17),
        ("O2in", 5),
        ("Tout", 0),
        ("Tin", 26),
        ("O2out", 1),
        ("Ne", 13),
        ("TA", 3),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Rows emitted.
    pub n: usize,
    /// Injected lag in samples per driver; unlisted drivers keep their defaults.
    pub delays: BTreeMap<String, usize>,
    /// Std of the white measurement noise on the target, relative to a
    /// unit-variance signal.
    pub noise_sigma: f64,
    /// Tone frequencies of the `Q` column in cycles/sample.
    pub tones: Vec<f64>,
    /// Std of the broadband AR(1) component of `Q`; each tone has unit
    /// amplitude.
    pub q_noise: f64,
    /// AR(1) coefficient of the planted residual on the target.
    pub residual_phi: f64,
    /// Stationary std of the planted residual, relative to the signal.
    pub residual_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 4000,
            delays: default_delays(),
            noise_sigma: 0.15,
            tones: vec![0.02, 0.10],
            q_noise: 0.1,
            residual_phi: 0.9,
            residual_sigma: 0.2,
        }
    }
}

impl SynthConfig {
    /// Default delays overlaid with the configured ones.
    pub fn effective_delays(&self) -> BTreeMap<String, usize> {
        let mut d = default_delays();
        d.extend(self.delays.iter().map(|(k, v)| (k.clone(), *v)));
        d
    }

    /// Signal-to-noise ratio of the target in dB, counting the planted
    /// residual as noise.
    pub fn snr_db(&self) -> f64 {
        let noise = self.noise_sigma.powi(2) + self.residual_sigma.powi(2);
        10.0 * (1.0 / noise).log10()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub delays: BTreeMap<String, usize>,
    /// Driver labels, strongest first.
    pub relevant_features: Vec<String>,
    pub irrelevant_features: Vec<String>,
    pub tones: Vec<f64>,
    pub dominant: String,
}

pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<(TimeSeriesTable, GroundTruth)> {
    let schema = Schema::table1();
    let delays = config.effective_delays();
    for label in delays.keys() {
        if schema.index_of(label).is_none() || label == schema.target() {
            return Err(Error::Config(format!("delay given for unknown input {label:?}")));
        }
    }
    let max_delay = delays.values().copied().max().unwrap_or(0);
    if config.n < max_delay + 10 {
        return Err(Error::invalid(format!(
            "n = {} is smaller than the largest injected delay ({max_delay}) + 10",
            config.n
        )));
    }
    if !(0.0..1.0).contains(&config.residual_phi.abs()) {
        return Err(Error::Config("residual_phi must lie in (-1, 1)".into()));
    }
    if !(config.q_noise >= 0.0) {
        return Err(Error::Config("q_noise must be non-negative".into()));
    }
    if config.tones.iter().any(|f| !(0.0..=0.5).contains(f)) {
        return Err(Error::Config("tones must lie in [0, 0.5] cycles/sample".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = config.n + max_delay;

    // Latent inputs over the full horizon, including burn-in for the delays.
    let mut latent: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for label in schema.candidates() {
        let series = if label == "Q" {
            q_series(len, &config.tones, config.q_noise, &mut rng)
        } else {
            let phi = if RELEVANT.iter().any(|(l, _)| *l == label) {
                0.35
            } else {
                rng.random_range(0.0..0.9)
            };
            ar1(len, phi, &mut rng)
        };
        latent.insert(label, standardize(series));
    }

    // Target on the emitted window t in [max_delay, len).
    let mut signal = vec![0.0; config.n];
    for (label, weight) in RELEVANT {
        let d = delays[label];
        let x = &latent[label];
        for (i, s) in signal.iter_mut().enumerate() {
            let t = i + max_delay;
            *s += weight * driver_response(label, x[t - d]);
        }
    }
    let signal = standardize(signal);
    let residual = {
        let r = ar1(config.n, config.residual_phi, &mut rng);
        let sd = variance(&r).sqrt();
        r.into_iter().map(|v| v / sd * config.residual_sigma).collect::<Vec<_>>()
    };
    let target: Vec<f64> = signal
        .iter()
        .zip(&residual)
        .map(|(s, r)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            s + r + config.noise_sigma * e
        })
        .collect();

    let columns = schema
        .variables()
        .iter()
        .map(|v| {
            let raw = if v.label == schema.target() {
                target.clone()
            } else {
                latent[&v.label][max_delay..].to_vec()
            };
            to_range(&raw, v.expected_range)
        })
        .collect();
    let table = TimeSeriesTable::new(schema, columns, DEFAULT_SAMPLE_PERIOD)?;

    let truth = GroundTruth {
        delays: RELEVANT
            .iter()
            .map(|(l, _)| (l.to_string(), delays[*l]))
            .collect(),
        relevant_features: RELEVANT.iter().map(|(l, _)| l.to_string()).collect(),
        irrelevant_features: IRRELEVANT.iter().map(|l| l.to_string()).collect(),
        tones: config.tones.clone(),
        dominant: "Q".to_string(),
    };
    Ok((table, truth))
}

/// Mildly nonlinear response of the target to one standardized driver.
fn driver_response(label: &str, x: f64) -> f64 {
    match label {
        "Q" => -(1.2 * x).tanh() / 0.75,
        "O2in" => x + 0.15 * x * x,
        "Tin" => (1.1 * x).sin() * 1.3,
        "TA" => (x).tanh() * 1.2,
        _ => x,
    }
}

/// Tones plus a slow drift plus an AR(1) innovation.
fn q_series(len: usize, tones: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let phases: Vec<f64> = tones.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let innovation: Vec<f64> = ar1(len, 0.3, rng)
        .into_iter()
        .map(|v| v * noise * (1.0f64 - 0.09).sqrt())
        .collect();
    let drift_phase = rng.random_range(0.0..2.0 * PI);
    (0..len)
        .map(|t| {
            let tf = t as f64;
            let tone: f64 = tones
                .iter()
                .zip(&phases)
                .map(|(f, p)| (2.0 * PI * f * tf + p).sin())
                .sum();
            let drift = 0.5 * (2.0 * PI * tf / len as f64 + drift_phase).sin();
            tone + drift + innovation[t]
        })
        .collect()
}

fn ar1(len: usize, phi: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut prev: f64 = StandardNormal.sample(rng);
    prev /= (1.0 - phi * phi).sqrt();
    for _ in 0..len {
        let e: f64 = StandardNormal.sample(rng);
        prev = phi * prev + e;
        out.push(prev);
    }
    out
}

fn standardize(x: Vec<f64>) -> Vec<f64> {
    let m = mean(&x);
    let sd = variance(&x).sqrt();
    x.into_iter().map(|v| (v - m) / sd).collect()
}

/// Affine map of the column extremes onto `range`.
fn to_range(x: &[f64], range: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = column_bounds(x);
    let (a, b) = range;
    x.iter().map(|&v| a + (v - lo) / (hi - lo) * (b - a)).collect()
}
