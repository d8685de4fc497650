use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use framescore::data::Setting;
use framescore::eval::Aggregation;
use framescore_cli::{cmd_ablate, cmd_curves, cmd_eval, cmd_experiment, cmd_synth, cmd_train};

#[derive(Parser)]
#[command(
    name = "framescore",
    about = "Multimodal frame-importance scoring: synthesize datasets, train, evaluate, run experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset with planted ground truth.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a full dataset and save a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint against a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "mean")]
        aggregation: Aggregation,
        #[arg(long, default_value_t = framescore::eval::DEFAULT_BUDGET_FRACTION)]
        budget_fraction: f64,
    },
    /// Run repeated seeded train/eval cycles and aggregate the metrics.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Override the setting in the config file.
        #[arg(long)]
        setting: Option<Setting>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment twice, audio fusion off then on, with shared seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-video predicted-vs-gt score curves as CSV.
    Curves {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = framescore::eval::DEFAULT_BUDGET_FRACTION)]
        budget_fraction: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, out } => cmd_synth(&config, &out),
        Command::Train { config, out } => cmd_train(&config, &out),
        Command::Eval {
            checkpoint,
            manifest,
            out,
            aggregation,
            budget_fraction,
        } => cmd_eval(&checkpoint, &manifest, aggregation, budget_fraction, &out),
        Command::Experiment {
            config,
            setting,
            out,
        } => cmd_experiment(&config, setting, &out),
        Command::Ablate { config, out } => cmd_ablate(&config, &out),
        Command::Curves {
            checkpoint,
            manifest,
            out,
            budget_fraction,
        } => cmd_curves(&checkpoint, &manifest, budget_fraction, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err}", err.category());
            ExitCode::FAILURE
        }
    }
}
