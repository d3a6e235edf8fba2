//! Dense ReLU networks with a softmax output, trained by mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An input vector and its class index.
pub type Example = (Vec<f64>, usize);

/// Weights are stored per layer as `out × in` row-major matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

/// Gradients shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::contract(format!(
            "layer dims {dims:?} need at least input and output and no zero width"
        )));
    }
    Ok(())
}

impl MlpModel {
    /// Assembles a model from explicit parameters, checking every shape.
    pub fn from_parts(layer_dims: Vec<usize>, weights: Vec<Vec<Vec<f64>>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self {
            layer_dims,
            weights,
            biases,
        };
        m.check().map_err(|(layer, reason)| Error::contract(format!("layer {layer}: {reason}")))?;
        Ok(m)
    }

    /// Returns the offending layer index and a reason on failure.
    pub(crate) fn check(&self) -> std::result::Result<(), (usize, String)> {
        check_dims(&self.layer_dims).map_err(|e| (0, e.to_string()))?;
        let n_layers = self.layer_dims.len() - 1;
        if self.weights.len() != n_layers || self.biases.len() != n_layers {
            return Err((
                self.weights.len().min(self.biases.len()),
                format!("expected {n_layers} weight matrices and bias vectors"),
            ));
        }
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            if w.len() != fan_out || w.iter().any(|r| r.len() != fan_in) {
                return Err((l, format!("weight matrix must be {fan_out}x{fan_in}")));
            }
            if self.biases[l].len() != fan_out {
                return Err((l, format!("bias vector must have length {fan_out}")));
            }
            if !w.iter().flatten().chain(&self.biases[l]).all(|v| v.is_finite()) {
                return Err((l, "non-finite parameter".into()));
            }
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn weights(&self) -> &[Vec<Vec<f64>>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Vec<Vec<f64>>], &mut [Vec<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.weights.iter().map(|w| vec![vec![0.0; w[0].len()]; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Activations of every layer; the last entry holds the logits.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = &acts[l];
            let z: Vec<f64> = w
                .iter()
                .zip(b)
                .map(|(row, bias)| row.iter().zip(input).map(|(a, v)| a * v).sum::<f64>() + bias)
                .collect();
            acts.push(if l == last { z } else { z.into_iter().map(|v| v.max(0.0)).collect() });
        }
        acts
    }
}

/// Glorot-uniform weights and zero biases.
pub fn init_mlp(layer_dims: &[usize], seed: u64) -> Result<MlpModel> {
    check_dims(layer_dims)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(
            (0..fan_out)
                .map(|_| (0..fan_in).map(|_| rng.random_range(-limit..limit)).collect())
                .collect(),
        );
        biases.push(vec![0.0; fan_out]);
    }
    Ok(MlpModel {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
    })
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_input(model: &MlpModel, x: &[f64]) -> Result<()> {
    if x.len() != model.input_dim() {
        return Err(Error::contract(format!(
            "input has {} values, model expects {}",
            x.len(),
            model.input_dim()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation("network input contains non-finite values".into()));
    }
    Ok(())
}

/// Class probabilities for one input.
pub fn forward(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    check_input(model, x)?;
    Ok(softmax(model.activations(x).last().unwrap()))
}

fn check_label(model: &MlpModel, label: usize) -> Result<()> {
    if label >= model.output_dim() {
        return Err(Error::contract(format!(
            "label {label} outside 0..{}",
            model.output_dim()
        )));
    }
    Ok(())
}

/// Accumulates loss and gradient sums over `batch[idx]`, unscaled.
fn accumulate(model: &MlpModel, batch: &[Example], idx: &[usize], g: &mut Gradients) -> Result<f64> {
    let mut loss = 0.0;
    for &i in idx {
        let (x, y) = &batch[i];
        check_input(model, x)?;
        check_label(model, *y)?;
        let acts = model.activations(x);
        let mut delta = softmax(acts.last().unwrap());
        loss -= delta[*y].max(f64::MIN_POSITIVE).ln();
        delta[*y] -= 1.0;
        for l in (0..model.weights.len()).rev() {
            let input = &acts[l];
            for (o, d) in delta.iter().enumerate() {
                g.biases[l][o] += d;
                for (gw, a) in g.weights[l][o].iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
            if l > 0 {
                delta = (0..input.len())
                    .map(|j| {
                        if input[j] > 0.0 {
                            model.weights[l].iter().zip(&delta).map(|(row, d)| row[j] * d).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }
    Ok(loss)
}

fn scale(g: &mut Gradients, k: f64) {
    g.weights.iter_mut().flatten().flatten().for_each(|v| *v *= k);
    g.biases.iter_mut().flatten().for_each(|v| *v *= k);
}

/// Mean cross-entropy over the batch and its exact gradient.
pub fn loss_and_gradients(model: &MlpModel, batch: &[Example]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::contract("empty batch"));
    }
    let idx: Vec<usize> = (0..batch.len()).collect();
    batch_gradients(model, batch, &idx)
}

fn batch_gradients(model: &MlpModel, batch: &[Example], idx: &[usize]) -> Result<(f64, Gradients)> {
    let mut g = model.zero_gradients();
    let loss = accumulate(model, batch, idx, &mut g)?;
    let k = 1.0 / idx.len() as f64;
    scale(&mut g, k);
    Ok((loss * k, g))
}

pub fn sgd_step(model: &mut MlpModel, grads: &Gradients, learning_rate: f64) {
    let (w, b) = model.params_mut();
    for (p, g) in w.iter_mut().flatten().flatten().zip(grads.weights.iter().flatten().flatten()) {
        *p -= learning_rate * g;
    }
    for (p, g) in b.iter_mut().flatten().zip(grads.biases.iter().flatten()) {
        *p -= learning_rate * g;
    }
}

/// Fraction of examples whose argmax prediction equals the label.
pub fn accuracy(model: &MlpModel, set: &[Example]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::contract("cannot score an empty set"));
    }
    let mut hits = 0usize;
    for (x, y) in set {
        if argmax(&forward(model, x)?) == *y {
            hits += 1;
        }
    }
    Ok(hits as f64 / set.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 500,
            batch_size: 16,
            seed: 0,
            hidden_width: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::contract(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.hidden_width == 0 {
            return Err(Error::contract("epochs, batch size and hidden width must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    /// Mean per-sample training loss observed during each epoch.
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Zero-based epoch of the returned snapshot.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Trains from `model` and returns the epoch snapshot with the best validation
/// accuracy (earliest on ties).
pub fn train(
    model: MlpModel,
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::contract("training and validation sets must be non-empty"));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut model = model;
    let mut best = model.clone();
    let mut hist = TrainHistory {
        best_val_accuracy: f64::NEG_INFINITY,
        ..Default::default()
    };
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (loss, g) = batch_gradients(&model, train_set, chunk)?;
            total += loss * chunk.len() as f64;
            sgd_step(&mut model, &g, config.learning_rate);
        }
        let acc = accuracy(&model, val_set)?;
        hist.train_loss.push(total / train_set.len() as f64);
        hist.val_accuracy.push(acc);
        if acc > hist.best_val_accuracy {
            hist.best_val_accuracy = acc;
            hist.best_epoch = epoch;
            best = model.clone();
        }
    }
    Ok((best, hist))
}
