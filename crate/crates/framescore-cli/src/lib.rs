//! Command-line harness for the frame-scoring pipeline: dataset synthesis,
//! training, evaluation, repeated seeded experiments, the audio ablation,
//! and score-curve export.

use std::path::{Path, PathBuf};

pub mod config;
pub mod runner;

use framescore::data::{generate_synthetic, load_dataset};
use framescore::eval::{evaluate, Aggregation, ProtocolConfig};
use framescore::fusion::ModalityDims;
use framescore::model::{fit, FrameScoringModel, TrainConfig};

use config::{read_config, resolve_relative, ExperimentFile, SynthFile, TrainFile};
use runner::{emit_curves, run_ablation, run_experiment, ExperimentPlan, OutputTracker};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] framescore::Error),
    #[error("failed to read config {path}: {source}")]
    ConfigIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse config {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },
    #[error("run {run} failed: {message}")]
    Run { run: usize, message: String },
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::ConfigIo { .. } | CliError::ConfigParse { .. } => "config",
            CliError::Run { .. } => "run",
        }
    }
}

/// `synth`: generate a seeded synthetic dataset under `out`.
pub fn cmd_synth(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let (file, echo) = read_config::<SynthFile>(config_path)?;
    let mut tracker = OutputTracker::new(out)?;
    let (records, _) = generate_synthetic(&file.synth, out)?;

    tracker.note("manifest.json");
    tracker.note("planted.json");
    for record in &records {
        let id = record.video_id();
        tracker.note(&format!("{id}.visual.bin"));
        tracker.note(&format!("{id}.text.bin"));
        tracker.note(&format!("{id}.audio.bin"));
        for k in 0..record.annotator_scores.len() {
            tracker.note(&format!("{id}.ann{k}.bin"));
        }
    }
    tracker.write("config.toml", &echo)?;
    tracker.finish()?;
    println!(
        "synthesized {} videos into {}",
        records.len(),
        out.display()
    );
    Ok(())
}

/// `train`: fit a model on a full dataset and save a checkpoint.
pub fn cmd_train(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let (file, echo) = read_config::<TrainFile>(config_path)?;
    let manifest = resolve_relative(config_path, &file.train.dataset);
    let records = load_dataset(&manifest)?;
    if records.is_empty() {
        return Err(framescore::Error::EmptyInput("dataset").into());
    }
    let dims = ModalityDims::of(&records[0].features);
    let mut model = FrameScoringModel::new(
        file.model.clone(),
        dims,
        file.train.audio_enabled,
        file.train.seed,
    )?;
    let train_config = TrainConfig {
        seed: file.train.seed,
        ..file.training.clone()
    };
    let log = fit(&mut model, &records, &train_config)?;

    let mut tracker = OutputTracker::new(out)?;
    tracker.write("config.toml", &echo)?;
    let mut log_csv = String::from("epoch,mean_loss\n");
    for (i, loss) in log.epoch_losses.iter().enumerate() {
        log_csv.push_str(&format!("{},{:.9}\n", i + 1, loss));
    }
    tracker.write("training_log.csv", &log_csv)?;
    let checkpoint = out.join("model.ckpt");
    model.save(&checkpoint)?;
    tracker.note("model.ckpt");
    tracker.finish()?;
    println!(
        "trained {} epochs (final loss {:.6}); checkpoint at {}",
        log.epoch_losses.len(),
        log.epoch_losses.last().expect("at least one epoch"),
        checkpoint.display()
    );
    Ok(())
}

/// `eval`: evaluate a checkpoint against a dataset.
pub fn cmd_eval(
    checkpoint: &Path,
    manifest: &Path,
    aggregation: Aggregation,
    budget_fraction: f64,
    out: &Path,
) -> Result<(), CliError> {
    let model = FrameScoringModel::load(checkpoint)?;
    let records = load_dataset(manifest)?;
    let protocol = ProtocolConfig {
        budget_fraction,
        aggregation,
    };
    let report = evaluate(&model, &records, &protocol)?;
    let mut tracker = OutputTracker::new(out)?;
    tracker.write("report.txt", &report.to_text())?;
    tracker.write("report.csv", &report.to_csv())?;
    tracker.finish()?;
    println!(
        "evaluated {} videos: f_score {:.6}, kendall_tau {:.6}, spearman_rho {:.6}",
        report.per_video.len(),
        report.f_score,
        report.kendall_tau,
        report.spearman_rho
    );
    Ok(())
}

fn plan_from_file(
    config_path: &Path,
    file: &ExperimentFile,
    setting_override: Option<framescore::data::Setting>,
) -> Result<ExperimentPlan, CliError> {
    let setting = setting_override.unwrap_or(file.experiment.setting);
    let expected = match setting {
        framescore::data::Setting::Canonical => 1,
        _ => 2,
    };
    if file.experiment.datasets.len() != expected {
        return Err(framescore::Error::Config(format!(
            "{setting} setting needs exactly {expected} dataset(s), got {}",
            file.experiment.datasets.len()
        ))
        .into());
    }
    let mut datasets = Vec::with_capacity(file.experiment.datasets.len());
    for rel in &file.experiment.datasets {
        datasets.push(load_dataset(&resolve_relative(config_path, rel))?);
    }
    Ok(ExperimentPlan {
        setting,
        datasets,
        repeats: file.experiment.repeats,
        eval_fraction: file.experiment.eval_fraction,
        base_seed: file.experiment.base_seed,
        audio_enabled: file.experiment.audio_enabled,
        aggregation: file.experiment.aggregation,
        budget_fraction: file.experiment.budget_fraction,
        model: file.model.clone(),
        training: file.training.clone(),
    })
}

/// `experiment`: repeated seeded runs plus an aggregate report.
pub fn cmd_experiment(
    config_path: &Path,
    setting_override: Option<framescore::data::Setting>,
    out: &Path,
) -> Result<(), CliError> {
    let (file, echo) = read_config::<ExperimentFile>(config_path)?;
    let plan = plan_from_file(config_path, &file, setting_override)?;
    plan.validate()?;
    let mut tracker = OutputTracker::new(out)?;
    tracker.write("config.toml", &echo)?;
    let aggregate = run_experiment(&plan, &mut tracker, "")?;
    tracker.finish()?;
    println!(
        "{} runs complete: f_score {:.6} +/- {:.6}, kendall_tau {:.6} +/- {:.6}",
        aggregate.runs.len(),
        aggregate.f_score.mean,
        aggregate.f_score.stddev,
        aggregate.kendall_tau.mean,
        aggregate.kendall_tau.stddev
    );
    Ok(())
}

/// `ablate`: the same experiment with audio fusion off, then on.
pub fn cmd_ablate(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let (file, echo) = read_config::<ExperimentFile>(config_path)?;
    let plan = plan_from_file(config_path, &file, None)?;
    plan.validate()?;
    let mut tracker = OutputTracker::new(out)?;
    tracker.write("config.toml", &echo)?;
    let report = run_ablation(&plan, &mut tracker)?;
    tracker.finish()?;
    println!(
        "ablation complete: f without audio {:.6}, with audio {:.6}, delta {:+.6}",
        report.without_audio.f_score.mean,
        report.with_audio.f_score.mean,
        report.mean_f_delta()
    );
    Ok(())
}

/// `curves`: per-video predicted-vs-gt score curves for a checkpoint.
pub fn cmd_curves(
    checkpoint: &Path,
    manifest: &Path,
    budget_fraction: f64,
    out: &Path,
) -> Result<(), CliError> {
    let model = FrameScoringModel::load(checkpoint)?;
    let records = load_dataset(manifest)?;
    let mut tracker = OutputTracker::new(out)?;
    let count = emit_curves(&model, &records, budget_fraction, &mut tracker)?;
    tracker.finish()?;
    println!("wrote {count} curve files to {}", out.display());
    Ok(())
}
