//! Experiment execution: repeated seeded runs, aggregation, the audio
//! ablation, and per-video score-curve export. All outputs are formatted
//! deterministically so identical configurations reproduce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use framescore::data::{make_splits, Setting, VideoRecord};
use framescore::error::Error as CoreError;
use framescore::eval::{evaluate, summarize, Aggregation, EvalReport, ProtocolConfig};
use framescore::fusion::ModalityDims;
use framescore::model::{fit, FrameScoringModel, TrainConfig, TransformerConfig};

use crate::CliError;

/// Seed-derivation constants: each run derives independent streams for
/// model initialization and shuffling from `base_seed + run_index`.
const INIT_SEED_XOR: u64 = 0x5eed_0001;
const SHUFFLE_SEED_XOR: u64 = 0x5eed_0002;

/// A fully resolved experiment: datasets are loaded, every knob explicit.
#[derive(Clone)]
pub struct ExperimentPlan {
    pub setting: Setting,
    pub datasets: Vec<Vec<VideoRecord>>,
    pub repeats: usize,
    pub eval_fraction: f64,
    pub base_seed: u64,
    pub audio_enabled: bool,
    pub aggregation: Aggregation,
    pub budget_fraction: f64,
    pub model: TransformerConfig,
    pub training: TrainConfig,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.repeats == 0 {
            return Err(CoreError::Config("repeats must be at least 1".into()).into());
        }
        let expected = match self.setting {
            Setting::Canonical => 1,
            Setting::Augment | Setting::Transfer => 2,
        };
        if self.datasets.len() != expected {
            return Err(CoreError::Config(format!(
                "{} setting needs exactly {expected} dataset(s), got {}",
                self.setting,
                self.datasets.len()
            ))
            .into());
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            return Err(CoreError::Config(format!(
                "eval_fraction must be in (0, 1), got {}",
                self.eval_fraction
            ))
            .into());
        }
        Ok(())
    }

    fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            budget_fraction: self.budget_fraction,
            aggregation: self.aggregation,
        }
    }
}

/// Tracks every file written under an output root and finally records them
/// in `files.json`.
pub struct OutputTracker {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputTracker {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CoreError::io(root, e))?;
        Ok(OutputTracker {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, relative: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CoreError::io(&path, e))?;
        self.files.push(relative.to_string());
        Ok(())
    }

    /// Record a file produced outside [`OutputTracker::write`].
    pub fn note(&mut self, relative: &str) {
        self.files.push(relative.to_string());
    }

    /// Write `files.json` listing everything produced under the root.
    pub fn finish(mut self) -> Result<(), CliError> {
        self.files.sort();
        let listing =
            serde_json::to_string_pretty(&self.files).expect("file list serialization cannot fail");
        let path = self.root.join("files.json");
        fs::write(&path, listing).map_err(|e| CoreError::io(&path, e))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MetricSummary {
    pub mean: f64,
    pub stddev: f64,
}

fn summarize_metric(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stddev = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        var.sqrt()
    } else {
        0.0
    };
    MetricSummary { mean, stddev }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub kendall_tau: f64,
    pub spearman_rho: f64,
    pub final_train_loss: f64,
}

#[derive(Clone, Debug)]
pub struct AggregateReport {
    pub setting: Setting,
    pub aggregation: Aggregation,
    pub audio_enabled: bool,
    pub eval_fraction: f64,
    pub budget_fraction: f64,
    pub base_seed: u64,
    pub runs: Vec<RunSummary>,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f_score: MetricSummary,
    pub kendall_tau: MetricSummary,
    pub spearman_rho: MetricSummary,
}

impl AggregateReport {
    fn from_runs(plan: &ExperimentPlan, runs: Vec<RunSummary>) -> Self {
        let collect = |f: fn(&RunSummary) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
        AggregateReport {
            setting: plan.setting,
            aggregation: plan.aggregation,
            audio_enabled: plan.audio_enabled,
            eval_fraction: plan.eval_fraction,
            budget_fraction: plan.budget_fraction,
            base_seed: plan.base_seed,
            precision: summarize_metric(&collect(|r| r.precision)),
            recall: summarize_metric(&collect(|r| r.recall)),
            f_score: summarize_metric(&collect(|r| r.f_score)),
            kendall_tau: summarize_metric(&collect(|r| r.kendall_tau)),
            spearman_rho: summarize_metric(&collect(|r| r.spearman_rho)),
            runs,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("setting: {}\n", self.setting));
        out.push_str(&format!("aggregation: {}\n", self.aggregation));
        out.push_str(&format!("audio_enabled: {}\n", self.audio_enabled));
        out.push_str(&format!("eval_fraction: {:.6}\n", self.eval_fraction));
        out.push_str(&format!("budget_fraction: {:.6}\n", self.budget_fraction));
        out.push_str(&format!("base_seed: {}\n", self.base_seed));
        out.push_str(&format!("repeats: {}\n\n", self.runs.len()));
        out.push_str(&format!(
            "{:<6} {:>10} {:>10} {:>10} {:>10} {:>12} {:>12} {:>16}\n",
            "run",
            "seed",
            "precision",
            "recall",
            "f_score",
            "kendall_tau",
            "spearman_rho",
            "final_loss"
        ));
        for r in &self.runs {
            out.push_str(&format!(
                "{:<6} {:>10} {:>10.6} {:>10.6} {:>10.6} {:>12.6} {:>12.6} {:>16.9}\n",
                r.run,
                r.seed,
                r.precision,
                r.recall,
                r.f_score,
                r.kendall_tau,
                r.spearman_rho,
                r.final_train_loss
            ));
        }
        out.push('\n');
        for (name, m) in [
            ("precision", &self.precision),
            ("recall", &self.recall),
            ("f_score", &self.f_score),
            ("kendall_tau", &self.kendall_tau),
            ("spearman_rho", &self.spearman_rho),
        ] {
            out.push_str(&format!(
                "{:<14} mean {:>10.6}  stddev {:>10.6}\n",
                name, m.mean, m.stddev
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "run,seed,precision,recall,f_score,kendall_tau,spearman_rho,final_train_loss\n",
        );
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                r.run,
                r.seed,
                r.precision,
                r.recall,
                r.f_score,
                r.kendall_tau,
                r.spearman_rho,
                r.final_train_loss
            ));
        }
        out.push_str(&format!(
            "mean,,{:.9},{:.9},{:.9},{:.9},{:.9},\n",
            self.precision.mean,
            self.recall.mean,
            self.f_score.mean,
            self.kendall_tau.mean,
            self.spearman_rho.mean
        ));
        out.push_str(&format!(
            "stddev,,{:.9},{:.9},{:.9},{:.9},{:.9},\n",
            self.precision.stddev,
            self.recall.stddev,
            self.f_score.stddev,
            self.kendall_tau.stddev,
            self.spearman_rho.stddev
        ));
        out
    }
}

fn training_log_csv(losses: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, loss) in losses.iter().enumerate() {
        out.push_str(&format!("{},{:.9}\n", i + 1, loss));
    }
    out
}

/// One seeded run: split, train, evaluate. Returns the eval report and the
/// training log.
pub fn single_run(
    plan: &ExperimentPlan,
    run_index: usize,
) -> Result<(EvalReport, Vec<f64>), CliError> {
    let run_seed = plan.base_seed + run_index as u64;
    let split = make_splits(&plan.datasets, plan.setting, run_seed, plan.eval_fraction)?;
    let dims = ModalityDims::of(&split.train[0].features);
    let mut model = FrameScoringModel::new(
        plan.model.clone(),
        dims,
        plan.audio_enabled,
        run_seed ^ INIT_SEED_XOR,
    )?;
    let train_config = TrainConfig {
        seed: run_seed ^ SHUFFLE_SEED_XOR,
        ..plan.training.clone()
    };
    let log = fit(&mut model, &split.train, &train_config)?;
    let report = evaluate(&model, &split.eval, &plan.protocol())?;
    Ok((report, log.epoch_losses))
}

/// Run `repeats` seeded repetitions and aggregate. Per-run reports land in
/// `run_<i>/`; the aggregate in `aggregate.txt` / `aggregate.csv`.
pub fn run_experiment(
    plan: &ExperimentPlan,
    tracker: &mut OutputTracker,
    prefix: &str,
) -> Result<AggregateReport, CliError> {
    plan.validate()?;
    let mut runs = Vec::with_capacity(plan.repeats);
    for run_index in 1..=plan.repeats {
        let (report, losses) = single_run(plan, run_index).map_err(|e| CliError::Run {
            run: run_index,
            message: e.to_string(),
        })?;
        let dir = format!("{prefix}run_{run_index}");
        tracker.write(&format!("{dir}/report.txt"), &report.to_text())?;
        tracker.write(&format!("{dir}/report.csv"), &report.to_csv())?;
        tracker.write(
            &format!("{dir}/training_log.csv"),
            &training_log_csv(&losses),
        )?;
        runs.push(RunSummary {
            run: run_index,
            seed: plan.base_seed + run_index as u64,
            precision: report.precision,
            recall: report.recall,
            f_score: report.f_score,
            kendall_tau: report.kendall_tau,
            spearman_rho: report.spearman_rho,
            final_train_loss: *losses.last().expect("at least one epoch"),
        });
    }
    let aggregate = AggregateReport::from_runs(plan, runs);
    tracker.write(&format!("{prefix}aggregate.txt"), &aggregate.to_text())?;
    tracker.write(&format!("{prefix}aggregate.csv"), &aggregate.to_csv())?;
    Ok(aggregate)
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub without_audio: AggregateReport,
    pub with_audio: AggregateReport,
}

impl AblationReport {
    /// Paired per-run F-score differences (with minus without).
    pub fn per_run_f_deltas(&self) -> Vec<f64> {
        self.with_audio
            .runs
            .iter()
            .zip(&self.without_audio.runs)
            .map(|(w, wo)| w.f_score - wo.f_score)
            .collect()
    }

    pub fn mean_f_delta(&self) -> f64 {
        self.with_audio.f_score.mean - self.without_audio.f_score.mean
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("audio ablation: identical seeds and splits, fusion audio off vs on\n\n");
        out.push_str(&format!(
            "{:<6} {:>16} {:>16} {:>12}\n",
            "run", "f_without_audio", "f_with_audio", "delta"
        ));
        for (w, wo) in self.with_audio.runs.iter().zip(&self.without_audio.runs) {
            out.push_str(&format!(
                "{:<6} {:>16.6} {:>16.6} {:>12.6}\n",
                w.run,
                wo.f_score,
                w.f_score,
                w.f_score - wo.f_score
            ));
        }
        out.push('\n');
        for (name, with, without) in [
            (
                "precision",
                &self.with_audio.precision,
                &self.without_audio.precision,
            ),
            (
                "recall",
                &self.with_audio.recall,
                &self.without_audio.recall,
            ),
            (
                "f_score",
                &self.with_audio.f_score,
                &self.without_audio.f_score,
            ),
            (
                "kendall_tau",
                &self.with_audio.kendall_tau,
                &self.without_audio.kendall_tau,
            ),
            (
                "spearman_rho",
                &self.with_audio.spearman_rho,
                &self.without_audio.spearman_rho,
            ),
        ] {
            out.push_str(&format!(
                "{:<14} without {:>10.6}  with {:>10.6}  delta {:>10.6}\n",
                name,
                without.mean,
                with.mean,
                with.mean - without.mean
            ));
        }
        out
    }
}

/// Run the identical experiment twice, audio disabled then enabled, with
/// identical seeds, and report both plus deltas.
pub fn run_ablation(
    plan: &ExperimentPlan,
    tracker: &mut OutputTracker,
) -> Result<AblationReport, CliError> {
    let mut without = plan.clone();
    without.audio_enabled = false;
    let without_audio = run_experiment(&without, tracker, "without_audio/")?;

    let mut with = plan.clone();
    with.audio_enabled = true;
    let with_audio = run_experiment(&with, tracker, "with_audio/")?;

    let report = AblationReport {
        without_audio,
        with_audio,
    };
    tracker.write("ablation.txt", &report.to_text())?;
    Ok(report)
}

/// One CSV per video: frame index, predicted score, ground-truth score, and
/// the model summary-mask bit at the given budget.
pub fn emit_curves(
    model: &FrameScoringModel,
    records: &[VideoRecord],
    budget_fraction: f64,
    tracker: &mut OutputTracker,
) -> Result<usize, CliError> {
    for record in records {
        let predicted = model.forward(&record.features)?;
        let selection = summarize(&predicted, &record.segments, budget_fraction)?;
        let mut csv = String::from("frame,predicted,gt,summary\n");
        for i in 0..record.frames() {
            csv.push_str(&format!(
                "{},{:.9},{:.9},{}\n",
                i,
                predicted.values()[i],
                record.gt_scores.values()[i],
                u8::from(selection.mask[i])
            ));
        }
        tracker.write(&format!("{}.csv", record.video_id()), &csv)?;
    }
    Ok(records.len())
}
