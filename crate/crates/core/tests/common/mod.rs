#![allow(dead_code)]

use std::f64::consts::PI;

use demonsonar_core::eval::manifest::FeatureRow;
use demonsonar_core::nn::{loss_and_gradients, Example, MlpModel};
use demonsonar_core::SalientFeatures;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

pub const BIN_HZ: f64 = 200.0 / 1024.0;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Textbook DFT with the twiddle angle computed directly.
pub fn reference_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| {
                let a = -2.0 * PI * (k as f64) * (t as f64) / n;
                acc + Complex64::new(v * a.cos(), v * a.sin())
            })
        })
        .collect()
}

/// Full convolution trimmed to the input length, centered on the middle tap.
pub fn reference_same_convolution(taps: &[f64], x: &[f64]) -> Vec<f64> {
    let half = (taps.len() / 2) as isize;
    (0..x.len() as isize)
        .map(|n| {
            taps.iter()
                .enumerate()
                .filter_map(|(k, &h)| {
                    let i = n + half - k as isize;
                    (0..x.len() as isize).contains(&i).then(|| h * x[i as usize])
                })
                .sum()
        })
        .collect()
}

/// Worst relative disagreement between analytic gradients and central
/// differences over every weight and bias.
pub fn gradient_check(model: &MlpModel, batch: &[Example], eps: f64) -> f64 {
    let (_, grads) = loss_and_gradients(model, batch).unwrap();
    let loss_with = |weights: Vec<Vec<Vec<f64>>>, biases: Vec<Vec<f64>>| {
        let m = MlpModel::from_parts(model.layer_dims().to_vec(), weights, biases).unwrap();
        loss_and_gradients(&m, batch).unwrap().0
    };
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
    let mut worst: f64 = 0.0;
    for l in 0..model.weights().len() {
        for i in 0..model.weights()[l].len() {
            for j in 0..model.weights()[l][i].len() {
                let mut plus = model.weights().to_vec();
                let mut minus = model.weights().to_vec();
                plus[l][i][j] += eps;
                minus[l][i][j] -= eps;
                let num = (loss_with(plus, model.biases().to_vec()) - loss_with(minus, model.biases().to_vec())) / (2.0 * eps);
                worst = worst.max(rel(grads.weights[l][i][j], num));
            }
            let mut plus = model.biases().to_vec();
            let mut minus = model.biases().to_vec();
            plus[l][i] += eps;
            minus[l][i] -= eps;
            let num = (loss_with(model.weights().to_vec(), plus) - loss_with(model.weights().to_vec(), minus)) / (2.0 * eps);
            worst = worst.max(rel(grads.biases[l][i], num));
        }
    }
    worst
}

/// Random inputs with random labels.
pub fn random_batch(seed: u64, n: usize, dim: usize, classes: usize) -> Vec<Example> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| (gaussian(&mut r, dim), r.random_range(0..classes)))
        .collect()
}

/// Gaussian blobs (sd 0.3) around well-separated centers on the axes.
pub fn blobs(seed: u64, classes: usize, per_class: usize, dim: usize) -> Vec<Example> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for c in 0..classes {
        let mut center = vec![0.0; dim];
        center[c % dim] = if c < dim { 3.0 } else { -3.0 };
        for _ in 0..per_class {
            let x = center.iter().map(|&m| m + 0.3 * r.sample::<f64, _>(StandardNormal)).collect();
            out.push((x, c));
        }
    }
    out
}

/// Feature rows whose coarse class sets the shaft rate and whose fine type
/// sets the blade rate, with small jitter.
pub fn feature_rows(seed: u64, per_class: usize, per_fine_type: usize) -> Vec<FeatureRow> {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    for c in 0..5usize {
        let n = if c == 1 { 10 * per_fine_type } else { per_class };
        for i in 0..n {
            let fine = (c == 1).then_some(i % 10);
            let shaft = 2.0 + 2.5 * c as f64 + 0.05 * r.sample::<f64, _>(StandardNormal);
            let blade = 10.0 + 6.0 * fine.unwrap_or(4) as f64 + 0.1 * r.sample::<f64, _>(StandardNormal);
            rows.push(FeatureRow {
                path: format!("c{c}_{i:04}.wav"),
                coarse: Some(c),
                fine,
                features: SalientFeatures {
                    blade_freq_hz: blade,
                    shaft_freq_hz: shaft,
                    avg_strength: 0.01 + 0.001 * r.random::<f64>(),
                    max_shaft_freq_hz: shaft,
                    max_blade_freq_hz: blade,
                },
            });
        }
    }
    rows
}
