//! Command-line driver for the register-swap TSP experiments.
//!
//! Every command validates an [`ExperimentConfig`], writes CSV and JSON
//! artifacts into an output directory and seals them with a checksummed
//! manifest. Identical configs produce byte-identical artifacts.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{run, Command};
pub use config::{ConfigError, ExperimentConfig};
pub use output::RunManifest;

#[derive(Debug, Parser)]
#[command(
    name = "regswap",
    version,
    about = "Register-swap variational TSP experiments"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON experiment config; missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Ten instances, a hundred initializations, every depth up to 30.
    #[arg(long)]
    pub paper_scale: bool,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides the config's root seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Cli {
    /// The effective configuration after applying flags.
    pub fn load_config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if self.paper_scale {
            cfg = cfg.paper_scale();
        }
        if let Some(seed) = self.seed {
            cfg.root_seed = seed;
        }
        Ok(cfg)
    }
}
