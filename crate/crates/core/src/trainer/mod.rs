//! Epoch loop over generated samples and bit-exact checkpoints.

mod checkpoint;

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use checkpoint::{ModelCheckpoint, TensorEntry, TrainMeta, CKPT_MAGIC};

use crate::dataset::{TrainingSet, UnkPolicy};
use crate::error::{Error, Result};
use crate::model::{adam_step, init_params, loss_and_backward, AdamConfig, AdamState, CellKind, Dims, Gradients, Label};
use crate::rng::{stream, streams};

/// Encoder sizes other than the vocabulary, which comes from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDims {
    pub word_dim: usize,
    pub hidden: usize,
    pub out: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            word_dim: 128,
            hidden: 256,
            out: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub margin: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub dims: ModelDims,
    pub cell: CellKind,
    pub unk_policy: UnkPolicy,
    /// Stop after this many epochs without improvement; `None` trains all epochs.
    pub early_stop_patience: Option<usize>,
    /// Fraction of samples held back to drive early stopping.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 50,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_epsilon: adam.epsilon,
            margin: 0.0,
            batch_size: 1,
            seed: 0,
            dims: ModelDims::default(),
            cell: CellKind::Elman,
            unk_policy: UnkPolicy::default(),
            early_stop_patience: None,
            validation_fraction: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        if !(-1.0..=1.0).contains(&self.margin) {
            return Err(Error::config(format!("margin {} outside [-1, 1]", self.margin)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation fraction must be in [0, 1)"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_loss: Option<f64>,
}

/// Per-epoch observer: the log line and the parameter norms after the epoch.
pub type EpochObserver<'a> = dyn FnMut(&EpochLog, &std::collections::BTreeMap<&'static str, f64>) + 'a;

pub fn train(config: &TrainConfig, data: &TrainingSet) -> Result<ModelCheckpoint> {
    train_with_observer(config, data, &mut |_, _| {})
}

/// Trains a fresh encoder on `data`. A pure function of `(config, data)`.
pub fn train_with_observer(config: &TrainConfig, data: &TrainingSet, observer: &mut EpochObserver<'_>) -> Result<ModelCheckpoint> {
    config.validate()?;
    if data.samples.is_empty() {
        return Err(Error::data("no training samples"));
    }
    if data.dim != config.dims.out {
        return Err(Error::DimMismatch {
            expected: config.dims.out,
            found: data.dim,
        });
    }
    let vocab = data.vocab.with_unk_policy(config.unk_policy);
    if let Some(s) = data.samples.iter().find(|s| s.command.token_ids.iter().any(|&id| id >= vocab.len())) {
        return Err(Error::data(format!(
            "training command {:?} has ids outside the {}-token vocabulary",
            s.command.tokens.join(" "),
            vocab.len()
        )));
    }
    let dims = Dims {
        vocab: vocab.len(),
        word_dim: config.dims.word_dim,
        hidden: config.dims.hidden,
        out: config.dims.out,
    };
    let mut params = init_params(dims, config.cell, config.seed)?;
    if let UnkPolicy::HashedRandom { seed } = config.unk_policy {
        params.unk_seed = seed;
    }
    let labels = data
        .samples
        .iter()
        .map(|s| Label::from_sign(s.label))
        .collect::<Result<Vec<_>>>()?;

    let mut indices: Vec<usize> = (0..data.samples.len()).collect();
    let mut validation = Vec::new();
    if config.validation_fraction > 0.0 {
        indices.shuffle(&mut stream(config.seed, streams::VALIDATION));
        let n_val = ((config.validation_fraction * indices.len() as f64).round() as usize).max(1);
        if n_val >= indices.len() {
            return Err(Error::config("validation fraction leaves no training samples"));
        }
        validation = indices.drain(..n_val).collect();
        indices.sort_unstable();
    }

    let margin = config.margin as f32;
    let mut state = AdamState::new(&params, config.adam());
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut best = f64::INFINITY;
    let mut since_best = 0;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut order = indices.clone();
        order.shuffle(&mut stream(config.seed, streams::EPOCH_BASE + epoch as u64));
        let mut total = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            let mut acc: Option<Gradients<f32>> = None;
            for &i in batch {
                let s = &data.samples[i];
                let (loss, grads) = loss_and_backward(&params, &s.command.token_ids, &s.feature, labels[i], margin)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("loss at epoch {} sample {i}", epoch + 1)));
                }
                total += f64::from(loss);
                match acc.as_mut() {
                    None => acc = Some(grads),
                    Some(a) => a.accumulate(&grads),
                }
            }
            let mut grads = acc.expect("non-empty batch");
            if batch.len() > 1 {
                grads.scale(1.0 / batch.len() as f32);
            }
            adam_step(&mut params, &grads, &mut state)
                .map_err(|e| Error::NonFinite(format!("epoch {}: {e}", epoch + 1)))?;
        }
        let mean_loss = total / indices.len() as f64;
        epoch_losses.push(mean_loss);

        let validation_loss = if validation.is_empty() {
            None
        } else {
            let mut v = 0.0f64;
            for &i in &validation {
                let s = &data.samples[i];
                v += f64::from(crate::model::sample_loss(&params, &s.command.token_ids, &s.feature, labels[i], margin)?);
            }
            Some(v / validation.len() as f64)
        };
        observer(
            &EpochLog {
                epoch: epoch + 1,
                mean_loss,
                wall_ms: started.elapsed().as_millis() as u64,
                validation_loss,
            },
            &params.layer_norms(),
        );

        if let Some(patience) = config.early_stop_patience {
            let monitored = validation_loss.unwrap_or(mean_loss);
            if monitored < best {
                best = monitored;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > patience {
                    break;
                }
            }
        }
    }

    Ok(ModelCheckpoint {
        config: config.clone(),
        vocab,
        params,
        meta: TrainMeta {
            epochs_run: epoch_losses.len(),
            epoch_losses,
            data_fingerprint: data.fingerprint(),
        },
    })
}
