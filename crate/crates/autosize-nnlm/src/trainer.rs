//! Stochastic proximal-gradient training: alternate a minibatch gradient
//! step with the regularizer's proximal map, recording per-epoch history.
//!
//! Gradients are normalized by minibatch size, so the learning rate is
//! batch-size-invariant and lambda is interpreted on the per-example
//! average loss scale. The prox runs after every minibatch, which is what
//! gradually drives unit groups to exact zero mid-training. One seeded
//! RNG stream drives both the epoch shuffles and the prox pivot choices;
//! with kind `none` or `lambda = 0` the prox consumes nothing, so such
//! runs are bit-identical to plain SGD.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::NGramDataset;
use crate::error::{Error, Result};
use crate::network::{self, Gradients, HiddenLayer, ModelParams, Workspace};
use crate::numeric::pairwise_sum;
use crate::prox::{self, RegularizerSpec};
use crate::pruning;
use crate::textio;

/// Knobs for one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub eta: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub validation: Option<NGramDataset>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            eta: 0.05,
            batch_size: 64,
            seed: 1,
            validation: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and > 0, got {}",
                self.eta
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".to_string()));
        }
        if let Some(v) = &self.validation {
            if v.is_empty() {
                return Err(Error::Config(
                    "validation dataset is empty; omit it instead".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// State recorded at the end of each epoch. Active counts are units whose
/// incoming group is not exactly zero at the epoch boundary; a later
/// gradient step may revive them, so the per-epoch series need not be
/// monotone. `reg_value` is R(W) for the chosen norm, unweighted.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub active_h1: usize,
    pub active_h2: usize,
    pub train_nll_per_token: f64,
    pub val_perplexity: Option<f64>,
    pub reg_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainingHistory {
    /// CSV rendering: one row per epoch, floats at 17 significant digits,
    /// empty val_perplexity field when no validation set was given.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,active_h1,active_h2,train_nll_per_token,val_perplexity,reg_value\n");
        for r in &self.records {
            let val = r
                .val_perplexity
                .map(textio::fmt_f64)
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                r.active_h1,
                r.active_h2,
                textio::fmt_f64(r.train_nll_per_token),
                val,
                textio::fmt_f64(r.reg_value),
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_atomic(path, &self.to_csv())
    }
}

/// One plain SGD step on a minibatch: every parameter moves by
/// `-eta * (summed gradient / minibatch size)`. Returns the summed NLL of
/// the minibatch at the pre-step parameters.
pub fn sgd_minibatch_step(
    params: &mut ModelParams,
    dataset: &NGramDataset,
    indices: &[usize],
    eta: f64,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Input("minibatch is empty".to_string()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= dataset.len()) {
        return Err(Error::Input(format!(
            "example index {bad} out of range (dataset has {})",
            dataset.len()
        )));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate must be finite and >= 0, got {eta}"
        )));
    }
    network::check_dataset(params, dataset)?;
    let mut ws = Workspace::new(params);
    let mut grads = Gradients::zeros_like(params);
    let mut losses = Vec::with_capacity(indices.len());
    let loss = network::minibatch_grad(params, dataset, indices, &mut ws, &mut grads, &mut losses);
    network::apply_gradient_step(params, &grads, eta / indices.len() as f64);
    Ok(loss)
}

/// The regularizer half-step: the row prox with `delta = eta * lambda` on
/// every hidden-unit group (identity for kind `none` or `lambda = 0`).
pub fn proximal_step<R: Rng + ?Sized>(
    params: &mut ModelParams,
    spec: &RegularizerSpec,
    eta: f64,
    rng: &mut R,
) {
    prox::apply_prox(params, spec, eta, rng);
}

/// Runs the full training loop in place and returns the per-epoch history.
/// Each epoch shuffles the example order from the seeded RNG, then for
/// every minibatch takes a gradient step followed by the proximal step.
/// Aborts with a diagnostic if the loss stops being finite.
pub fn train(
    params: &mut ModelParams,
    dataset: &NGramDataset,
    config: &TrainConfig,
    spec: &RegularizerSpec,
) -> Result<TrainingHistory> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Input("training dataset is empty".to_string()));
    }
    network::check_dataset(params, dataset)?;
    if let Some(v) = &config.validation {
        network::check_dataset(params, v)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut ws = Workspace::new(params);
    let mut grads = Gradients::zeros_like(params);
    let mut epoch_losses: Vec<f64> = Vec::with_capacity(dataset.len());
    let mut history = TrainingHistory::default();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        epoch_losses.clear();
        for (mb, chunk) in order.chunks(config.batch_size).enumerate() {
            let loss =
                network::minibatch_grad(params, dataset, chunk, &mut ws, &mut grads, &mut epoch_losses);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    minibatch: mb + 1,
                });
            }
            network::apply_gradient_step(params, &grads, config.eta / chunk.len() as f64);
            prox::apply_prox(params, spec, config.eta, &mut rng);
        }

        let active_h1 = params.h1() - pruning::zero_units(params, HiddenLayer::First).len();
        let active_h2 = params.h2() - pruning::zero_units(params, HiddenLayer::Second).len();
        let val_perplexity = match &config.validation {
            Some(v) => Some(network::perplexity(params, v)?),
            None => None,
        };
        history.records.push(EpochRecord {
            epoch,
            active_h1,
            active_h2,
            train_nll_per_token: pairwise_sum(&epoch_losses) / dataset.len() as f64,
            val_perplexity,
            reg_value: prox::regularizer_value(params, spec.kind),
        });
    }
    Ok(history)
}
