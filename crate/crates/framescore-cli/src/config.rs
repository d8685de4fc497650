//! TOML configuration files for the CLI subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use framescore::data::{Setting, SynthConfig};
use framescore::eval::Aggregation;
use framescore::model::{TrainConfig, TransformerConfig};

use crate::CliError;

/// `synth` subcommand configuration: a single `[synth]` table.
#[derive(Debug, Serialize, Deserialize)]
pub struct SynthFile {
    pub synth: SynthConfig,
}

/// `train` subcommand configuration.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainFile {
    pub train: TrainSection,
    #[serde(default)]
    pub model: TransformerConfig,
    #[serde(default)]
    pub training: TrainConfig,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainSection {
    /// Path to the dataset manifest, relative to the config file.
    pub dataset: PathBuf,
    #[serde(default = "default_true")]
    pub audio_enabled: bool,
    #[serde(default)]
    pub seed: u64,
}

/// `experiment` / `ablate` subcommand configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub model: TransformerConfig,
    #[serde(default)]
    pub training: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub setting: Setting,
    /// Manifest paths, relative to the config file. One for canonical, two
    /// for augment and transfer.
    pub datasets: Vec<PathBuf>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_eval_fraction")]
    pub eval_fraction: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_true")]
    pub audio_enabled: bool,
    #[serde(default = "default_aggregation")]
    pub aggregation: Aggregation,
    #[serde(default = "default_budget_fraction")]
    pub budget_fraction: f64,
}

fn default_true() -> bool {
    true
}

fn default_repeats() -> usize {
    5
}

fn default_eval_fraction() -> f64 {
    0.2
}

fn default_aggregation() -> Aggregation {
    Aggregation::Mean
}

fn default_budget_fraction() -> f64 {
    framescore::eval::DEFAULT_BUDGET_FRACTION
}

/// Read and parse a TOML config file, returning the parsed value along with
/// the verbatim text (echoed into the output directory).
pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, String), CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ConfigIo {
        path: path.to_path_buf(),
        source,
    })?;
    let parsed = toml::from_str(&text).map_err(|e| CliError::ConfigParse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((parsed, text))
}

/// Resolve a path in a config file relative to the config file's directory.
pub fn resolve_relative(config_path: &Path, target: &Path) -> PathBuf {
    if target.is_absolute() {
        target.to_path_buf()
    } else {
        config_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(target)
    }
}
