//! Dual-head duration predictor.
//!
//! Both heads read the sum of the encoder's mask-position vectors. The
//! exact head is a bias-free dot product giving log seconds; the range head
//! is a bias-free linear map to one logit per unit, followed by softmax.

mod checkpoint;
mod encoder;
mod train;

pub use checkpoint::{load, save, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use encoder::{BaselineEncoder, Encoder};
pub use train::{mean_loss, train, LossKind, TrainConfig, TrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapters::ModelInput;
use crate::duration::{closest_unit, LogSeconds, TemporalUnit, UnitInventory};
use crate::error::{Error, Result};

/// Shape and seed of a model with the baseline encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub dim: usize,
    pub buckets: usize,
    pub window: usize,
    pub inventory: UnitInventory,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { dim: 32, buckets: 4096, window: 4, inventory: UnitInventory::Eight, seed: 0 }
    }
}

/// Supervision for one training example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Exact(LogSeconds),
    Range(TemporalUnit),
}

impl Target {
    pub fn loss_kind(self) -> LossKind {
        match self {
            Target::Exact(_) => LossKind::Mse,
            Target::Range(_) => LossKind::CrossEntropy,
        }
    }
}

/// Gradients in the same layout as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<f64>,
    pub w_e: Vec<f64>,
    pub w_r: Vec<f64>,
}

impl Gradients {
    fn zeros<E: Encoder>(model: &DualHeadModel<E>) -> Self {
        Gradients {
            encoder: vec![0.0; model.encoder.params().len()],
            w_e: vec![0.0; model.w_e.len()],
            w_r: vec![0.0; model.w_r.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualHeadModel<E = BaselineEncoder> {
    pub encoder: E,
    /// Regression weights, length `dim`.
    pub w_e: Vec<f64>,
    /// Classification weights, `inventory.len()` rows of `dim`, row-major.
    pub w_r: Vec<f64>,
    pub inventory: UnitInventory,
}

impl DualHeadModel<BaselineEncoder> {
    /// Fresh model; every parameter uniform in [-0.05, 0.05] from `config.seed`.
    pub fn from_config(config: &ModelConfig) -> Result<Self> {
        if config.dim == 0 || config.buckets == 0 {
            return Err(Error::Config("model dim and buckets must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let encoder = BaselineEncoder::new(config.dim, config.buckets, config.window, &mut rng);
        Ok(Self::with_encoder(encoder, config.inventory, &mut rng))
    }

    pub fn config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            dim: self.encoder.dim(),
            buckets: self.encoder.buckets(),
            window: self.encoder.window(),
            inventory: self.inventory,
            seed,
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<E: Encoder> DualHeadModel<E> {
    pub fn with_encoder<R: Rng>(encoder: E, inventory: UnitInventory, rng: &mut R) -> Self {
        let dim = encoder.dim();
        let mut init = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-encoder::INIT_SCALE..=encoder::INIT_SCALE)).collect()
        };
        let w_e = init(dim);
        let w_r = init(dim * inventory.len());
        DualHeadModel { encoder, w_e, w_r, inventory }
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    fn validate<'a>(&self, input: &'a ModelInput) -> Result<Vec<&'a str>> {
        if input.mask_positions.is_empty() {
            return Err(Error::InvalidInput(format!("no mask positions in {:?}", input.text)));
        }
        let tokens = input.tokens();
        if let Some(&p) = input.mask_positions.iter().find(|&&p| p >= tokens.len()) {
            return Err(Error::InvalidInput(format!("mask position {p} beyond {} tokens", tokens.len())));
        }
        Ok(tokens)
    }

    /// Σ of the mask-position vectors.
    pub fn pooled(&self, input: &ModelInput) -> Result<Vec<f64>> {
        let tokens = self.validate(input)?;
        Ok(self.pool(&tokens, &input.mask_positions))
    }

    fn pool(&self, tokens: &[&str], masks: &[usize]) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim()];
        for v in self.encoder.encode(tokens, masks) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
        sum
    }

    fn logits(&self, pooled: &[f64]) -> Vec<f64> {
        self.w_r.chunks(self.dim()).map(|row| dot(row, pooled)).collect()
    }

    pub fn predict_exact(&self, input: &ModelInput) -> Result<LogSeconds> {
        Ok(LogSeconds(dot(&self.w_e, &self.pooled(input)?)))
    }

    /// Most probable unit (ties to the smaller unit) and the full distribution.
    pub fn predict_range(&self, input: &ModelInput) -> Result<(TemporalUnit, Vec<f64>)> {
        let probs = softmax(&self.logits(&self.pooled(input)?));
        let mut best = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        Ok((self.inventory.units()[best], probs))
    }

    /// Unit implied by the exact head.
    pub fn predict_exact_unit(&self, input: &ModelInput) -> Result<TemporalUnit> {
        Ok(closest_unit(self.predict_exact(input)?, self.inventory))
    }

    fn class_index(&self, unit: TemporalUnit) -> Result<usize> {
        self.inventory.index_of(unit).ok_or_else(|| {
            Error::InvalidInput(format!("unit {unit} not in the {}-unit inventory", self.inventory.len()))
        })
    }

    /// Loss of a single example: squared error or negative log-likelihood.
    pub fn loss(&self, input: &ModelInput, target: Target) -> Result<f64> {
        let pooled = self.pooled(input)?;
        match target {
            Target::Exact(y) => {
                let r = dot(&self.w_e, &pooled) - y.0;
                Ok(r * r)
            }
            Target::Range(unit) => {
                let k = self.class_index(unit)?;
                Ok(-softmax(&self.logits(&pooled))[k].ln())
            }
        }
    }

    /// Loss of one example, with its gradient added into `grads`.
    pub fn accumulate_gradients(&self, input: &ModelInput, target: Target, grads: &mut Gradients) -> Result<f64> {
        let tokens = self.validate(input)?;
        let masks = &input.mask_positions;
        let pooled = self.pool(&tokens, masks);
        let (loss, d_pooled) = match target {
            Target::Exact(y) => {
                let r = dot(&self.w_e, &pooled) - y.0;
                for (g, s) in grads.w_e.iter_mut().zip(&pooled) {
                    *g += 2.0 * r * s;
                }
                (r * r, self.w_e.iter().map(|w| 2.0 * r * w).collect::<Vec<_>>())
            }
            Target::Range(unit) => {
                let k = self.class_index(unit)?;
                let mut d_logits = softmax(&self.logits(&pooled));
                let loss = -d_logits[k].ln();
                d_logits[k] -= 1.0;
                let dim = self.dim();
                let mut d_pooled = vec![0.0; dim];
                for (c, dl) in d_logits.iter().enumerate() {
                    let row = &self.w_r[c * dim..(c + 1) * dim];
                    let grow = &mut grads.w_r[c * dim..(c + 1) * dim];
                    for j in 0..dim {
                        grow[j] += dl * pooled[j];
                        d_pooled[j] += dl * row[j];
                    }
                }
                (loss, d_pooled)
            }
        };
        // Every mask vector feeds the sum with weight one.
        let upstream = vec![d_pooled; masks.len()];
        self.encoder.backward(&tokens, masks, &upstream, &mut grads.encoder);
        Ok(loss)
    }

    pub fn gradients(&self, input: &ModelInput, target: Target) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros(self);
        let loss = self.accumulate_gradients(input, target, &mut grads)?;
        Ok((loss, grads))
    }

    pub(crate) fn zero_gradients(&self) -> Gradients {
        Gradients::zeros(self)
    }
}
