//! Run configuration: one TOML file with flat sections, overridden by flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use durpipe::eval::{Protocol, DEFAULT_RANGE};
use durpipe::extract::ExtractionConfig;
use durpipe::model::{LossKind, ModelConfig, TrainConfig};
use durpipe::synth::{default_cues, Cue, SynthSpec};
use durpipe::{TemporalUnit, UnitInventory};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    #[default]
    Exact,
    Range,
}

impl Head {
    pub fn loss(self) -> LossKind {
        match self {
            Head::Exact => LossKind::Mse,
            Head::Range => LossKind::CrossEntropy,
        }
    }
}

/// Layout of a training file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// instances.jsonl from `extract`
    #[default]
    Instances,
    /// tab-separated event rows
    Timebank,
    /// QA rows, one JSON object per line
    Mctaco,
}

/// Where training starts: fresh parameters or a saved checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Init {
    #[default]
    Fresh,
    Checkpoint(PathBuf),
}

impl FromStr for Init {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(if s == "fresh" { Init::Fresh } else { Init::Checkpoint(PathBuf::from(s)) })
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Init::Fresh => f.write_str("fresh"),
            Init::Checkpoint(p) => write!(f, "{}", p.display()),
        }
    }
}

impl Serialize for Init {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Init {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub dim: usize,
    pub buckets: usize,
    pub window: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection { dim: m.dim, buckets: m.buckets, window: m.window }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub head: Head,
    pub init: Init,
    pub data_format: DataFormat,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub warmup_proportion: f64,
    pub epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            head: Head::Exact,
            init: Init::Fresh,
            data_format: DataFormat::Instances,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            warmup_proportion: t.warmup_proportion,
            epochs: t.epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub protocol: Protocol,
    pub head: Head,
    /// Log-second tolerance of the QA range rule; `inf` accepts everything.
    pub range: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { protocol: Protocol::Fine, head: Head::Exact, range: DEFAULT_RANGE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub sentences_per_cue: usize,
    pub heldout_per_cue: usize,
    pub finetune_per_cue: usize,
    pub questions_per_cue: usize,
    pub sigma: f64,
    pub units: Vec<TemporalUnit>,
    pub cues: Vec<Cue>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthSpec::default();
        SynthSection {
            sentences_per_cue: s.sentences_per_cue,
            heldout_per_cue: s.heldout_per_cue,
            finetune_per_cue: s.finetune_per_cue,
            questions_per_cue: s.questions_per_cue,
            sigma: s.sigma,
            units: s.units,
            cues: default_cues(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Every random choice of a run derives from this.
    pub seed: u64,
    pub inventory: UnitInventory,
    pub extract: ExtractionConfig,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub synth: SynthSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            inventory: UnitInventory::Eight,
            extract: ExtractionConfig::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            synth: SynthSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile { path: path.into(), source: Box::new(e) })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dim: self.model.dim,
            buckets: self.model.buckets,
            window: self.model.window,
            inventory: self.inventory,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            warmup_proportion: self.train.warmup_proportion,
            epochs: self.train.epochs,
            seed: self.seed,
            loss: self.train.head.loss(),
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        let s = &self.synth;
        SynthSpec {
            seed: self.seed,
            sentences_per_cue: s.sentences_per_cue,
            heldout_per_cue: s.heldout_per_cue,
            finetune_per_cue: s.finetune_per_cue,
            questions_per_cue: s.questions_per_cue,
            sigma: s.sigma,
            units: s.units.clone(),
            cues: s.cues.clone(),
        }
    }
}
