use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_update, AdamConfig, AdamState, Mode, Model, Scalar};
use crate::fusion::argmax;
use crate::{seed, Error, Result};

/// Fixed-length inputs with integer labels, stored contiguously.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Examples {
    input_len: usize,
    data: Vec<f32>,
    labels: Vec<usize>,
}

impl Examples {
    pub fn new(input_len: usize) -> Self {
        Examples { input_len, data: Vec::new(), labels: Vec::new() }
    }

    pub fn push(&mut self, input: &[f32], label: usize) -> Result<()> {
        if input.len() != self.input_len {
            return Err(Error::structural(format!(
                "example has {} values, expected {}",
                input.len(),
                self.input_len
            )));
        }
        self.data.extend_from_slice(input);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn input(&self, i: usize) -> &[f32] {
        &self.data[i * self.input_len..(i + 1) * self.input_len]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 30, batch_size: 240, adam: AdamConfig::default(), seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::validation(format!(
                "epochs and batch size must be positive, got {} and {}",
                self.epochs, self.batch_size
            )));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training cross-entropy (dropout active).
    pub loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

fn convert<S: Scalar>(x: &[f32]) -> Vec<S> {
    x.iter().map(|&v| S::from_f32(v)).collect()
}

/// Mini-batch Adam on `data[train_idx]`; the order is reshuffled each
/// epoch and accuracy on `val_idx` is recorded when it is non-empty.
pub fn train<S: Scalar>(
    model: &mut Model<S>,
    data: &Examples,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    if train_idx.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    if data.input_len() != model.arch().input_len() {
        return Err(Error::structural(format!(
            "examples have {} values, model expects {}",
            data.input_len(),
            model.arch().input_len()
        )));
    }
    if let Some(&i) = train_idx.iter().chain(val_idx).find(|&&i| i >= data.len()) {
        return Err(Error::structural(format!("example index {i} out of range ({} examples)", data.len())));
    }
    let mut state = AdamState::new(cfg.adam, model.params())?;
    let mut order = train_idx.to_vec();
    let mut grads = Vec::new();
    let mut history = History::default();
    for epoch in 0..cfg.epochs {
        let epoch_seed = seed::derive(cfg.seed, epoch as u64);
        order.clone_from_slice(train_idx);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<Vec<S>> = chunk.iter().map(|&i| convert(data.input(i))).collect();
            let refs: Vec<&[S]> = inputs.iter().map(Vec::as_slice).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.label(i)).collect();
            let mode = Mode::Train { seed: seed::derive(epoch_seed, b as u64 + 1) };
            let loss = model.loss_and_grad_into(&refs, &labels, mode, &mut grads)?.to_f64();
            if !loss.is_finite() {
                return Err(Error::validation(format!(
                    "training loss became non-finite in epoch {}; lower the learning rate",
                    epoch + 1
                )));
            }
            loss_sum += loss * chunk.len() as f64;
            adam_update(model.params_mut(), &grads, &mut state)?;
        }
        let val_accuracy = if val_idx.is_empty() {
            None
        } else {
            let probs = predict(model, data, val_idx)?;
            let hits = probs
                .iter()
                .zip(val_idx)
                .filter(|(p, &i)| argmax(p) == data.label(i))
                .count();
            Some(hits as f64 / val_idx.len() as f64)
        };
        history.epochs.push(EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / order.len() as f64,
            val_accuracy,
        });
    }
    Ok(history)
}

/// Eval-mode class probabilities for `data[idx]`.
pub fn predict<S: Scalar>(model: &Model<S>, data: &Examples, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
    idx.iter().map(|&i| predict_proba(model, data.input(i))).collect()
}

pub fn predict_proba<S: Scalar>(model: &Model<S>, input: &[f32]) -> Result<Vec<f64>> {
    let x = convert::<S>(input);
    let mut out = model.forward(&[&x], Mode::Eval)?;
    Ok(out.pop().unwrap_or_default().into_iter().map(Scalar::to_f64).collect())
}
