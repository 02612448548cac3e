//! Seeded synthetic data shared by the integration suites.
#![allow(dead_code)]

use panfis::features::FeatureVector;
use panfis::Sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Slow upward drift with small noise and a level shift from index `shift_at`.
pub fn level_shift_series(len: usize, shift_at: usize, jump: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.01).unwrap();
    (0..len)
        .map(|t| {
            let base = 0.3 + 0.001 * t as f64 + noise.sample(&mut r);
            if t >= shift_at {
                base + jump
            } else {
                base
            }
        })
        .collect()
}

/// Nonlinear 2-D regression stream with three regimes.
pub fn regime_stream(len: usize, seed: u64) -> Vec<Sample> {
    let mut r = rng(seed);
    (0..len)
        .map(|k| {
            let regime = (k * 3) / len;
            let x1: f64 = r.random::<f64>() * 0.3 + 0.3 * regime as f64;
            let x2: f64 = r.random::<f64>();
            let t = match regime {
                0 => 0.2 + 0.5 * x1 - 0.1 * x2,
                1 => (6.0 * x1).sin() + 0.3 * x2,
                _ => 1.5 - x1 * x2,
            };
            Sample::new(vec![x1, x2], t)
        })
        .collect()
}

/// Synthetic bearing-like feature table: nine columns drifting with wear,
/// a degradation spike near the end.
pub fn feature_table(rows: usize, seed: u64) -> Vec<FeatureVector> {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    (0..rows)
        .map(|i| {
            let wear = i as f64 / rows as f64;
            let spike = if (88..93).contains(&i) { 1.0 } else { 0.0 };
            let mut n = || noise.sample(&mut r) * 0.02;
            let rms = 0.5 + 0.8 * wear + 0.4 * spike + n();
            let variance = rms * rms * 0.9 + n();
            let kurtosis = 3.0 + 2.0 * wear * wear + 3.0 * spike + n();
            let skewness = 0.1 * (6.0 * wear).sin() + n();
            let crest = 2.5 + 0.5 * kurtosis.sqrt() + n();
            let shape = 1.2 + 0.05 * wear + n();
            let entropy = 2.2 - 0.3 * wear + n();
            let upper = 3.0 * rms + n();
            let lower = -3.0 * rms + n();
            FeatureVector::from_values(
                i.to_string(),
                [rms, variance, skewness, kurtosis, shape, crest, entropy, upper, lower],
            )
        })
        .collect()
}
