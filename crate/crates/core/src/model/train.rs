use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DualHeadModel, Encoder, Target};
use crate::adapters::ModelInput;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Fraction of all steps over which the rate ramps up linearly.
    pub warmup_proportion: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::pretrain(LossKind::Mse)
    }
}

impl TrainConfig {
    /// lr 5e-5, batch 16, warmup 0.1, one pass.
    pub fn pretrain(loss: LossKind) -> Self {
        TrainConfig { learning_rate: 5e-5, batch_size: 16, warmup_proportion: 0.1, epochs: 1, seed: 0, loss }
    }

    /// lr 2e-5, batch 32, warmup 0.1, three epochs.
    pub fn finetune(loss: LossKind) -> Self {
        TrainConfig { learning_rate: 2e-5, batch_size: 32, warmup_proportion: 0.1, epochs: 3, seed: 0, loss }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("learning rate {} must be finite and >= 0", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_proportion) {
            return Err(Error::Config(format!("warmup proportion {} outside [0, 1]", self.warmup_proportion)));
        }
        Ok(())
    }

    /// Rate at 0-based `step` of `total` steps.
    pub fn rate_at(&self, step: usize, total: usize) -> f64 {
        let warmup = (self.warmup_proportion * total as f64).ceil() as usize;
        if warmup == 0 || step >= warmup {
            self.learning_rate
        } else {
            self.learning_rate * (step + 1) as f64 / warmup as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss per step, measured before that step's update.
    pub losses: Vec<f64>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Updates each parameter block in turn; `offset` walks the shared moment buffers.
    fn step(&mut self, blocks: &mut [(&mut [f64], &[f64])], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let mut offset = 0;
        for (params, grads) in blocks.iter_mut() {
            for (i, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
                let k = offset + i;
                self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * g;
                self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * g * g;
                if self.m[k] != 0.0 {
                    *p -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + ADAM_EPS);
                }
            }
            offset += params.len();
        }
    }
}

/// Minibatch Adam with linear warmup then a constant rate.
///
/// The squared-error loss updates the encoder and the exact head; the
/// cross-entropy loss updates the encoder and the range head. Order of
/// examples is reshuffled every epoch from `cfg.seed`.
pub fn train<E: Encoder>(
    model: &mut DualHeadModel<E>,
    data: &[(ModelInput, Target)],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if let Some((_, t)) = data.iter().find(|(_, t)| t.loss_kind() != cfg.loss) {
        return Err(Error::Config(format!("target {t:?} does not fit the {:?} loss", cfg.loss)));
    }
    if data.is_empty() {
        warn!("no training data; model left unchanged");
        return Ok(TrainReport::default());
    }

    let steps_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total = steps_per_epoch * cfg.epochs;
    let n_params = model.encoder.params().len() + model.w_e.len() + model.w_r.len();
    let mut adam = Adam::new(n_params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport { losses: Vec::with_capacity(total) };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let step = report.losses.len();
            let mut grads = model.zero_gradients();
            let mut loss = 0.0;
            for &i in batch {
                let (input, target) = &data[i];
                loss += model.accumulate_gradients(input, *target, &mut grads)?;
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grads.encoder.iter_mut().chain(&mut grads.w_e).chain(&mut grads.w_r) {
                *g *= scale;
            }
            report.losses.push(loss * scale);

            let lr = cfg.rate_at(step, total);
            let DualHeadModel { encoder, w_e, w_r, .. } = model;
            adam.step(&mut [(encoder.params_mut(), &grads.encoder), (w_e, &grads.w_e), (w_r, &grads.w_r)], lr);
        }
        let tail = &report.losses[report.losses.len() - steps_per_epoch..];
        info!("epoch {}: mean loss {:.5}", epoch + 1, tail.iter().sum::<f64>() / tail.len() as f64);
    }
    Ok(report)
}

/// Mean loss over a dataset without updating anything.
pub fn mean_loss<E: Encoder>(model: &DualHeadModel<E>, data: &[(ModelInput, Target)]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (input, target) in data {
        total += model.loss(input, *target)?;
    }
    Ok(total / data.len() as f64)
}
