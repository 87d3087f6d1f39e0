//! Variational mode decomposition.
//!
//! The signal is mirror-extended, transformed once, and the modes are updated
//! in the frequency domain on the analytic (non-negative frequency) half:
//!
//! ```text
//! u_k   <- (f - sum_{i != k} u_i + lambda / 2) / (1 + 2 alpha (w - w_k)^2)
//! w_k   <- sum w |u_k|^2 / sum |u_k|^2
//! lambda <- lambda + tau (f - sum_k u_k)
//! ```
//!
//! until the summed relative change of the mode spectra drops below `tol`.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{pearson, Real};

/// Scalars the decomposition runs on.
pub trait Spectral: Real + FftNum {}
impl<T: Real + FftNum> Spectral for T {}

pub const MIN_SIGNAL_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaInit {
    /// `w_k = k / (2K)`, spread uniformly over `[0, 0.5)`.
    Uniform,
    /// Every center starts at DC.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VmdConfig {
    /// Bandwidth penalty.
    pub alpha: f64,
    /// Dual ascent step; 0 lets the modes ignore exact reconstruction.
    pub tau: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub init: OmegaInit,
}

impl Default for VmdConfig {
    fn default() -> Self {
        Self {
            alpha: 2000.0,
            tau: 0.0,
            tol: 1e-7,
            max_iter: 500,
            init: OmegaInit::Uniform,
        }
    }
}

/// Modes sorted by ascending center frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSet<T> {
    pub modes: Vec<Vec<T>>,
    /// Center frequencies in cycles/sample.
    pub omegas: Vec<T>,
    /// `signal - sum(modes)`.
    pub residual: Vec<T>,
    pub signal: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Real> ModeSet<T> {
    pub fn k(&self) -> usize {
        self.modes.len()
    }

    fn from_modes(signal: Vec<T>, modes: Vec<Vec<T>>, omegas: Vec<T>, converged: bool, iterations: usize) -> Self {
        let residual = residual_of(&signal, &modes);
        Self {
            modes,
            omegas,
            residual,
            signal,
            converged,
            iterations,
        }
    }

    /// Sum of the modes plus the residual at sample `t`.
    pub fn reconstruct(&self) -> Vec<T> {
        (0..self.signal.len())
            .map(|t| self.modes.iter().map(|m| m[t]).sum::<T>() + self.residual[t])
            .collect()
    }

    /// One column per mode, headed `IMF1..IMFk`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record((1..=self.k()).map(|i| format!("IMF{i}")))?;
        for t in 0..self.signal.len() {
            w.write_record(self.modes.iter().map(|m| format!("{:?}", m[t].as_f64())))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn omegas_json(&self) -> Result<String> {
        let o: Vec<f64> = self.omegas.iter().map(|v| v.as_f64()).collect();
        Ok(serde_json::to_string_pretty(&o)?)
    }
}

fn residual_of<T: Real>(signal: &[T], modes: &[Vec<T>]) -> Vec<T> {
    signal
        .iter()
        .enumerate()
        .map(|(t, &s)| s - modes.iter().map(|m| m[t]).sum::<T>())
        .collect()
}

/// Decomposes `signal` into `k` band-limited modes.
pub fn decompose<T: Spectral>(signal: &[T], k: usize, cfg: &VmdConfig) -> Result<ModeSet<T>> {
    let n = signal.len();
    if n < MIN_SIGNAL_LEN {
        return Err(Error::invalid(format!(
            "signal needs at least {MIN_SIGNAL_LEN} samples, got {n}"
        )));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if !(cfg.alpha > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::invalid("alpha and tol must be positive"));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("VMD signal"));
    }

    // Mirror extension: flipped first half, signal, flipped second half.
    let half = n / 2;
    let mut ext: Vec<Complex<T>> = Vec::with_capacity(2 * n);
    ext.extend(signal[..half].iter().rev().map(|&v| Complex::new(v, T::zero())));
    ext.extend(signal.iter().map(|&v| Complex::new(v, T::zero())));
    ext.extend(signal[half..].iter().rev().map(|&v| Complex::new(v, T::zero())));
    let len = ext.len();

    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(len).process(&mut ext);
    // Non-negative frequencies only: bins 0..=len/2 of the unshifted spectrum.
    let n_pos = len / 2 + 1;
    let f_hat: Vec<Complex<T>> = ext[..n_pos].to_vec();
    let freqs: Vec<T> = (0..n_pos).map(|i| T::from_count(i) / T::from_count(len)).collect();

    let alpha = T::lit(cfg.alpha);
    let tau = T::lit(cfg.tau);
    let two = T::lit(2.0);
    let zero = Complex::new(T::zero(), T::zero());

    let mut omega: Vec<T> = (0..k)
        .map(|i| match cfg.init {
            OmegaInit::Uniform => T::lit(0.5) / T::from_count(k) * T::from_count(i),
            OmegaInit::Zero => T::zero(),
        })
        .collect();
    let mut u_hat = vec![vec![zero; n_pos]; k];
    let mut lambda = vec![zero; n_pos];
    let mut total = vec![zero; n_pos];

    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut diff = T::zero();
        for m in 0..k {
            let old = std::mem::replace(&mut u_hat[m], vec![zero; n_pos]);
            let mut num = T::zero();
            let mut den = T::zero();
            let mut change = T::zero();
            let mut old_norm = T::zero();
            for i in 0..n_pos {
                let others = total[i] - old[i];
                let d = freqs[i] - omega[m];
                let new = (f_hat[i] - others + lambda[i] / two) / (T::one() + two * alpha * d * d);
                let p = new.norm_sqr();
                num += freqs[i] * p;
                den += p;
                change += (new - old[i]).norm_sqr();
                old_norm += old[i].norm_sqr();
                total[i] = others + new;
                u_hat[m][i] = new;
            }
            if den > T::zero() {
                omega[m] = num / den;
            }
            diff += if old_norm > T::zero() {
                change / old_norm
            } else if change > T::zero() {
                T::infinity()
            } else {
                T::zero()
            };
        }
        if tau != T::zero() {
            for i in 0..n_pos {
                lambda[i] = lambda[i] + (f_hat[i] - total[i]) * tau;
            }
        }
        if diff < T::lit(cfg.tol) {
            converged = true;
            break;
        }
    }

    // Back to the time domain via Hermitian completion, then trim the mirror.
    let inverse = planner.plan_fft_inverse(len);
    let scale = T::one() / T::from_count(len);
    let mut modes: Vec<(T, Vec<T>)> = u_hat
        .iter()
        .zip(&omega)
        .map(|(uh, &w)| {
            let mut full = vec![zero; len];
            full[..n_pos].copy_from_slice(uh);
            for i in 1..len - n_pos + 1 {
                full[len - i] = uh[i].conj();
            }
            inverse.process(&mut full);
            let series = full[half..half + n].iter().map(|c| c.re * scale).collect();
            (w, series)
        })
        .collect();
    modes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let (omegas, modes): (Vec<T>, Vec<Vec<T>>) = modes.into_iter().unzip();
    Ok(ModeSet::from_modes(signal.to_vec(), modes, omegas, converged, iterations))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeCountConfig {
    pub corr_threshold: f64,
    pub k_start: usize,
    pub k_cap: usize,
}

impl Default for ModeCountConfig {
    fn default() -> Self {
        Self {
            corr_threshold: 0.1,
            k_start: 2,
            k_cap: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSelection<T> {
    pub k: usize,
    pub modes: ModeSet<T>,
    /// Correlation of the last mode with the signal for each K tried.
    pub correlations: Vec<(usize, T)>,
    /// The cap was reached before the stopping rule fired.
    pub hit_cap: bool,
}

/// Grows K from `k_start` until the highest-frequency mode correlates with
/// the signal below `corr_threshold`.
pub fn select_mode_count<T: Spectral>(
    signal: &[T],
    cfg: &VmdConfig,
    count: &ModeCountConfig,
) -> Result<ModeSelection<T>> {
    if count.k_start == 0 || count.k_cap < count.k_start {
        return Err(Error::invalid("mode count search needs 1 <= k_start <= k_cap"));
    }
    let threshold = T::lit(count.corr_threshold);
    let mut correlations = Vec::new();
    let mut k = count.k_start;
    loop {
        let modes = decompose(signal, k, cfg)?;
        let p = pearson(modes.modes.last().expect("k >= 1"), signal);
        correlations.push((k, p));
        if p < threshold || k == count.k_cap {
            let hit_cap = !(p < threshold);
            return Ok(ModeSelection {
                k,
                modes,
                correlations,
                hit_cap,
            });
        }
        k += 1;
    }
}

/// Drops the highest-frequency mode and folds it into the residual.
pub fn prune_last_mode<T: Real>(set: &ModeSet<T>) -> Result<ModeSet<T>> {
    if set.k() < 2 {
        return Err(Error::invalid("cannot prune a single-mode set"));
    }
    let keep = set.k() - 1;
    Ok(ModeSet::from_modes(
        set.signal.clone(),
        set.modes[..keep].to_vec(),
        set.omegas[..keep].to_vec(),
        set.converged,
        set.iterations,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(n: usize, f: f64) -> Vec<f64> {
        (0..n).map(|t| (2.0 * PI * f * t as f64).sin()).collect()
    }

    #[test]
    fn zero_signal_gives_zero_modes() {
        let m = decompose(&vec![0.0f64; 64], 3, &VmdConfig::default()).unwrap();
        assert!(m.modes.iter().flatten().all(|&v| v == 0.0));
        assert!(m.converged);
    }

    #[test]
    fn bookkeeping_is_exact() {
        let s: Vec<f64> = (0..300).map(|t| (t as f64 * 0.3).sin() + 0.01 * t as f64).collect();
        let m = decompose(&s, 3, &VmdConfig::default()).unwrap();
        for (a, b) in m.reconstruct().iter().zip(&s) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(m.omegas.iter().all(|&w| (0.0..=0.5).contains(&w)));
        assert!(m.omegas.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn prune_contract() {
        let s = tone(256, 0.05);
        let m = decompose(&s, 2, &VmdConfig::default()).unwrap();
        let p = prune_last_mode(&m).unwrap();
        assert_eq!(p.k(), 1);
        for (a, b) in p.reconstruct().iter().zip(&s) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(prune_last_mode(&p).is_err());
    }

    #[test]
    fn short_signal_rejected() {
        assert!(decompose(&[1.0f64; 16], 1, &VmdConfig::default()).is_err());
        assert!(decompose(&[1.0f64; 64], 0, &VmdConfig::default()).is_err());
    }

    #[test]
    fn single_precision_runs() {
        let s: Vec<f32> = tone(256, 0.05).into_iter().map(|v| v as f32).collect();
        let m = decompose(&s, 1, &VmdConfig::default()).unwrap();
        assert!((m.omegas[0] - 0.05).abs() < 0.002);
    }

    #[test]
    fn csv_has_one_column_per_mode() {
        let m = decompose(&tone(64, 0.1), 2, &VmdConfig::default()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("IMF1,IMF2\n"));
        assert_eq!(text.lines().count(), 65);
    }
}
