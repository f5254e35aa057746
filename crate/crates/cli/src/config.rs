//! Pipeline settings shared by every subcommand.
//!
//! Values come from three layers: built-in defaults, an optional JSON file
//! given with `--config`, and command-line flags. Later layers win.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub mod defaults {
    pub const K: usize = 12;
    pub const SEED: u64 = 42;
    pub const SPLIT_RATIO: f64 = 0.8;
    pub const EPOCHS: usize = 100;
    pub const BATCH_SIZE: usize = 2;
    pub const LEARNING_RATE: f32 = 1e-3;
    pub const MOMENTUM: f32 = 0.9;
    pub const NUM_CLASSES: usize = 12;
    pub const STAGE_WIDTHS: &str = "16,32,64";
    pub const MAX_ITERS: usize = 100;
    pub const TOL: f64 = 0.5;
    pub const WARMUP: usize = 10;
    pub const REPEATS: usize = 3;
    pub const SCENES: usize = 8;
    pub const SCENE_SIZE: usize = 32;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerChoice {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data_dir: Option<PathBuf>,
    pub palette: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
    pub k: usize,
    pub seed: u64,
    pub split_ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub optimizer: OptimizerChoice,
    pub momentum: f32,
    pub max_grad_norm: Option<f32>,
    pub num_classes: usize,
    pub stage_widths: Vec<usize>,
    pub max_iters: usize,
    pub tol: f64,
    pub warmup: usize,
    pub repeats: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: None,
            palette: None,
            checkpoint: None,
            report_dir: None,
            k: defaults::K,
            seed: defaults::SEED,
            split_ratio: defaults::SPLIT_RATIO,
            epochs: defaults::EPOCHS,
            batch_size: defaults::BATCH_SIZE,
            learning_rate: defaults::LEARNING_RATE,
            optimizer: OptimizerChoice::Adam,
            momentum: defaults::MOMENTUM,
            max_grad_norm: None,
            num_classes: defaults::NUM_CLASSES,
            stage_widths: parse_widths(defaults::STAGE_WIDTHS).expect("default widths parse"),
            max_iters: defaults::MAX_ITERS,
            tol: defaults::TOL,
            warmup: defaults::WARMUP,
            repeats: defaults::REPEATS,
        }
    }
}

/// Parses a config file. Unknown keys and type mismatches are config errors
/// that quote serde's message, which names the offending key.
pub fn load_config(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_config(text: &str) -> Result<PipelineConfig, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn parse_widths(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|w| w.trim().parse::<usize>().map_err(|_| format!("bad stage width {w:?}")))
        .collect()
}
