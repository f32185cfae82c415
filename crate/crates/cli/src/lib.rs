//! Command-line driver: `extract`, `train`, `eval`, `baseline` and `synth`.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use durpipe::eval::Protocol;
use durpipe::extract::PatternSet;
use durpipe::UnitInventory;

use config::{DataFormat, Head, Init, RunConfig};
use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "durpipe", version, about = "Weakly supervised event-duration pipeline")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Temporal unit inventory: 7 (second..year) or 8 (with decade).
    #[arg(long, global = true, value_parser = parse_inventory)]
    pub inventory: Option<UnitInventory>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Harvest labeled duration instances from raw text.
    Extract {
        /// Text files, `.jsonl` document files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_parser = parse_patterns)]
        patterns: Option<PatternSet>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Train one head and save a checkpoint.
    Train {
        data: PathBuf,
        #[arg(long, value_enum)]
        head: Option<Head>,
        /// `fresh` or the path of a checkpoint to continue from.
        #[arg(long)]
        init: Option<Init>,
        #[arg(long, value_enum)]
        data_format: Option<DataFormat>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Score a checkpoint on a gold dataset.
    Eval {
        checkpoint: PathBuf,
        data: PathBuf,
        #[arg(long, value_enum)]
        head: Option<Head>,
        #[command(flatten)]
        scoring: Scoring,
        #[command(flatten)]
        out: OutDir,
    },
    /// Score the majority-class predictor on a gold dataset.
    Baseline {
        data: PathBuf,
        #[command(flatten)]
        scoring: Scoring,
        #[command(flatten)]
        out: OutDir,
    },
    /// Generate a synthetic corpus with planted durations and matching gold files.
    Synth {
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Output directory; created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Scoring {
    #[arg(long, value_parser = parse_protocol)]
    pub protocol: Option<Protocol>,
    /// QA range rule in log seconds (`inf` accepted).
    #[arg(long)]
    pub range: Option<f64>,
}

fn parse_inventory(s: &str) -> std::result::Result<UnitInventory, String> {
    let n: usize = s.parse().map_err(|_| format!("expected 7 or 8, got {s:?}"))?;
    UnitInventory::from_size(n).map_err(|e| e.to_string())
}

fn parse_patterns(s: &str) -> std::result::Result<PatternSet, String> {
    s.parse().map_err(|e: durpipe::Error| e.to_string())
}

fn parse_protocol(s: &str) -> std::result::Result<Protocol, String> {
    s.parse().map_err(|e: durpipe::Error| e.to_string())
}

impl Cli {
    /// Config file values with this invocation's flags applied.
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(i) = self.inventory {
            cfg.inventory = i;
        }
        match &self.command {
            Command::Extract { patterns, .. } => {
                if let Some(p) = patterns {
                    cfg.extract.patterns = *p;
                }
            }
            Command::Train { head, init, data_format, .. } => {
                if let Some(h) = head {
                    cfg.train.head = *h;
                }
                if let Some(i) = init {
                    cfg.train.init = i.clone();
                }
                if let Some(f) = data_format {
                    cfg.train.data_format = *f;
                }
            }
            Command::Eval { head, scoring, .. } => {
                if let Some(h) = head {
                    cfg.eval.head = *h;
                }
                scoring.apply(&mut cfg);
            }
            Command::Baseline { scoring, .. } => scoring.apply(&mut cfg),
            Command::Synth { .. } => {}
        }
        Ok(cfg)
    }
}

impl Scoring {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(p) = self.protocol {
            cfg.eval.protocol = p;
        }
        if let Some(r) = self.range {
            cfg.eval.range = r;
        }
    }
}

/// Runs one invocation, printing a short summary to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.effective_config()?;
    cfg.train_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
    match &cli.command {
        Command::Extract { inputs, out, .. } => {
            let result = commands::extract(&cfg, inputs, &out.out)?;
            let s = &result.stats;
            println!(
                "extract: {} documents, {} sentences, {} matched, {} filtered, {} instances",
                s.documents, s.sentences, s.matched, s.filtered, s.instances
            );
        }
        Command::Train { data, out, .. } => {
            commands::train_cmd(&cfg, data, &out.out)?;
            println!("train: wrote {}", out.out.join("checkpoint.bin").display());
        }
        Command::Eval { checkpoint, data, out, .. } => {
            let report = commands::eval_cmd(&cfg, checkpoint, data, &out.out)?;
            println!("{}", report.headline());
        }
        Command::Baseline { data, out, .. } => {
            let report = commands::baseline_cmd(&cfg, data, &out.out)?;
            println!("majority {}", report.headline());
        }
        Command::Synth { out } => {
            commands::synth_cmd(&cfg, &out.out)?;
            println!("synth: wrote {}", out.out.display());
        }
    }
    Ok(())
}
