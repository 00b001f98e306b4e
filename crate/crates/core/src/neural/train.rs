use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::model::length_chunks;
use crate::neural::{Adam, AdamConfig, Model, SeqInput, Target};
use crate::types::Task;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Upper bound on `batch × longest sequence`; long phenotyping stays get
    /// smaller batches.
    pub max_batch_tokens: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 128,
            max_batch_tokens: 128 * 48,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Minibatch Adam over `epochs` passes. Each epoch shuffles, groups
/// sequences of equal length, and visits the batches in random order. LoS
/// models start with the output bias at the mean target so the ReLU output
/// is live from the first step.
pub fn train(model: &mut Model, inputs: &[SeqInput<'_>], targets: &[Target], cfg: &TrainConfig) -> Result<TrainLog> {
    if inputs.len() != targets.len() {
        return Err(Error::Shape {
            what: "training targets",
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    if inputs.is_empty() {
        return Err(Error::Input("no training instances".into()));
    }
    if model.spec.task == Task::Los {
        let mean = targets.iter().map(|t| t[0]).sum::<f64>() / targets.len() as f64;
        model.set_output_bias(mean);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam, model.n_params());
    for r in model.frozen_ranges() {
        adam.freeze(r);
    }
    let mut grad = vec![0.0; model.n_params()];
    let mut log = TrainLog {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        steps: 0,
    };
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut rng);
        order.sort_by_key(|&i| inputs[i].len);
        let mut chunks = length_chunks(&order, |i| inputs[i].len, cfg.batch_size.max(1), cfg.max_batch_tokens);
        chunks.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, chunk) in chunks.iter().enumerate() {
            let batch: Vec<SeqInput<'_>> = chunk.iter().map(|&i| inputs[i]).collect();
            let tgt: Vec<&[f64]> = chunk.iter().map(|&i| targets[i].as_slice()).collect();
            grad.fill(0.0);
            let l = model.loss_and_grad(&batch, &tgt, &mut grad)?;
            if !l.is_finite() {
                return Err(Error::NonFiniteGradient { epoch, batch: bi });
            }
            adam.step(model.params_mut(), &grad, epoch, bi)?;
            total += l * chunk.len() as f64;
            log.steps += 1;
        }
        let mean = total / inputs.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        log.epoch_losses.push(mean);
    }
    Ok(log)
}
