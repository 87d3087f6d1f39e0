mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scr_dynpredict::vmd::{decompose, prune_last_mode, select_mode_count, ModeCountConfig, ModeSet, VmdConfig};

fn tones(n: usize, parts: &[(f64, f64)]) -> Vec<f64> {
    (0..n)
        .map(|t| parts.iter().map(|&(f, a)| a * (2.0 * PI * f * t as f64).sin()).sum())
        .collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn peak_freq(x: &[f64]) -> f64 {
    let p = common::periodogram(x);
    let k = (1..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    k as f64 / x.len() as f64
}

fn max_bookkeeping_error(set: &ModeSet<f64>) -> f64 {
    set.reconstruct()
        .iter()
        .zip(&set.signal)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn single_tone_k1() {
    let x = tones(1024, &[(0.05, 1.0)]);
    let set = decompose(&x, 1, &VmdConfig::default()).unwrap();
    let w = set.omegas[0];
    assert!((0.049..=0.051).contains(&w), "omega {w}");
    // Mirror-extension kinks leave error near the two ends only.
    let inner = 128..896;
    let diff: Vec<f64> = x[inner.clone()].iter().zip(&set.modes[0][inner.clone()]).map(|(a, b)| a - b).collect();
    let rel = norm(&diff) / norm(&x[inner]);
    assert!(rel < 0.02, "relative error {rel}");
}

#[test]
fn two_tones_recovered() {
    let x = tones(2048, &[(0.02, 1.0), (0.10, 1.0)]);
    let set = decompose(&x, 2, &VmdConfig::default()).unwrap();
    for (w, truth) in set.omegas.iter().zip([0.02, 0.10]) {
        assert!((w - truth).abs() <= 0.02 * truth, "omega {w} vs {truth}");
    }
    // Each mode's own spectrum peaks at its tone.
    assert!((peak_freq(&set.modes[0]) - 0.02).abs() < 1e-3);
    assert!((peak_freq(&set.modes[1]) - 0.10).abs() < 1e-3);
    assert!(max_bookkeeping_error(&set) < 1e-10);
}

#[test]
fn noisy_tones_within_two_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let clean = tones(2048, &[(0.03, 1.0), (0.08, 0.8), (0.2, 0.6)]);
    let power = clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64;
    // 20 dB SNR with uniform noise of matched variance.
    let half_width = (3.0 * power / 100.0).sqrt();
    let x: Vec<f64> = clean.iter().map(|v| v + rng.random_range(-half_width..half_width)).collect();
    let set = decompose(&x, 3, &VmdConfig::default()).unwrap();
    for (w, truth) in set.omegas.iter().zip([0.03, 0.08, 0.2]) {
        assert!((w - truth).abs() <= 0.02 * truth, "omega {w} vs {truth}");
    }
}

#[test]
fn energy_is_not_inflated() {
    let x = tones(2048, &[(0.02, 1.0), (0.1, 0.5), (0.3, 0.25)]);
    let set = decompose(&x, 3, &VmdConfig::default()).unwrap();
    let modes: f64 = set.modes.iter().map(|m| norm(m).powi(2)).sum();
    assert!(modes <= 1.05 * norm(&x).powi(2));
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn mode_count_stops_at_first_weak_last_mode() {
    let x = tones(1024, &[(0.05, 1.0)]);
    let cfg = VmdConfig::default();
    let count = ModeCountConfig::default();
    let sel = select_mode_count(&x, &cfg, &count).unwrap();
    let ks: Vec<usize> = sel.correlations.iter().map(|c| c.0).collect();
    assert_eq!(ks, (count.k_start..=sel.k).collect::<Vec<_>>());
    let (last, before) = sel.correlations.split_last().unwrap();
    assert!(before.iter().all(|c| c.1 >= count.corr_threshold));
    assert_eq!(last.1 < count.corr_threshold, !sel.hit_cap);
    // Recompute each correlation from a fresh decomposition.
    for &(k, p) in &sel.correlations {
        let set = decompose(&x, k, &cfg).unwrap();
        assert!((pearson(set.modes.last().unwrap(), &x) - p).abs() < 1e-12);
    }
    assert_eq!(sel.modes, decompose(&x, sel.k, &cfg).unwrap());
}

#[test]
fn unit_threshold_stops_immediately() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..512).map(|_| rng.random_range(-1.0..1.0)).collect();
    let count = ModeCountConfig {
        corr_threshold: 1.0,
        k_start: 3,
        k_cap: 12,
    };
    let sel = select_mode_count(&x, &VmdConfig::default(), &count).unwrap();
    assert_eq!(sel.k, 3);
    assert_eq!(sel.correlations.len(), 1);
}

#[test]
fn cap_is_flagged() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
    let count = ModeCountConfig {
        corr_threshold: -1.0,
        k_start: 2,
        k_cap: 4,
    };
    let sel = select_mode_count(&x, &VmdConfig::default(), &count).unwrap();
    assert_eq!(sel.k, 4);
    assert!(sel.hit_cap);
    assert_eq!(sel.correlations.iter().map(|c| c.0).collect::<Vec<_>>(), vec![2, 3, 4]);
}

#[test]
fn pruning_keeps_bookkeeping() {
    let x = tones(1024, &[(0.02, 1.0), (0.1, 1.0), (0.25, 0.3)]);
    let set = decompose(&x, 3, &VmdConfig::default()).unwrap();
    let pruned = prune_last_mode(&set).unwrap();
    assert_eq!(pruned.k(), 2);
    assert_eq!(pruned.modes, set.modes[..2].to_vec());
    assert!(max_bookkeeping_error(&pruned) < 1e-10);
    let single = decompose(&x, 1, &VmdConfig::default()).unwrap();
    assert!(prune_last_mode(&single).is_err());
}

#[test]
fn deterministic_and_round_trips() {
    let x = tones(512, &[(0.04, 1.0), (0.15, 0.5)]);
    let a = decompose(&x, 2, &VmdConfig::default()).unwrap();
    let b = decompose(&x, 2, &VmdConfig::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(ModeSet::<f64>::from_json(&a.to_json().unwrap()).unwrap(), a);
}

#[test]
fn rejects_bad_input() {
    let cfg = VmdConfig::default();
    assert!(decompose(&[0.0; 31], 1, &cfg).is_err());
    assert!(decompose(&[0.0; 64], 0, &cfg).is_err());
    let mut x = vec![0.0; 64];
    x[3] = f64::NAN;
    assert!(decompose(&x, 1, &cfg).is_err());
}

#[test]
fn f32_agrees_on_center_frequencies() {
    let x = tones(1024, &[(0.02, 1.0), (0.10, 1.0)]);
    let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let a = decompose(&x, 2, &VmdConfig::default()).unwrap();
    let b = decompose(&x32, 2, &VmdConfig::default()).unwrap();
    for (w, w32) in a.omegas.iter().zip(&b.omegas) {
        assert!((w - *w32 as f64).abs() < 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bookkeeping_is_exact(seed in any::<u64>(), k in 1usize..5, n in 32usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let set = decompose(&x, k, &VmdConfig { max_iter: 50, ..VmdConfig::default() }).unwrap();
        prop_assert_eq!(set.k(), k);
        prop_assert!(set.modes.iter().all(|m| m.len() == n));
        prop_assert!(set.omegas.iter().all(|w| (0.0..=0.5).contains(w)));
        prop_assert!(set.omegas.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(max_bookkeeping_error(&set) < 1e-10);
    }
}
