//! Acceptance suite: one test per release criterion, each printing a single
//! PASS/FAIL line (visible with `--nocapture`). Thresholds and runtime
//! bounds are asserted, not just reported.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use framescore::data::{
    generate_synthetic, gt_from_annotators, make_splits, FeatureBundle, ScoreVector, Setting,
    SynthConfig, VideoRecord,
};
use framescore::eval::{
    evaluate_video, f_score_protocol, kendall_tau, knapsack_select, spearman_rho, Aggregation,
    ProtocolConfig,
};
use framescore::fusion::ModalityDims;
use framescore::model::{fit, FrameScoringModel, TrainConfig, TransformerConfig};
use framescore::numerics::autodiff::{gradients, mse, Tape};
use framescore::numerics::gradcheck::finite_difference_check;
use framescore::numerics::{AdamState, Tensor2};
use framescore_cli::runner::{run_ablation, ExperimentPlan, OutputTracker};

fn report(criterion: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {criterion}: {status} ({detail})");
    assert!(pass, "{criterion}: {detail}");
}

fn recovery_synth_config(name: &str, seed: u64, audio_dependent: bool) -> SynthConfig {
    SynthConfig {
        name: name.into(),
        num_videos: 40,
        frames_min: 48,
        frames_max: 96,
        tokens_min: 8,
        tokens_max: 16,
        visual_dim: 16,
        text_dim: 12,
        audio_dim: 8,
        seed,
        audio_dependent,
        score_noise: 0.05,
        annotator_noise: 0.05,
    }
}

fn toy_eval_record(seed: u64, frames: usize, annotators: usize) -> VideoRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments = Vec::new();
    let mut start = 0;
    while start < frames {
        let end = (start + rng.random_range(4..9)).min(frames);
        segments.push((start, end));
        start = end;
    }
    let annotator_scores: Vec<ScoreVector> = (0..annotators)
        .map(|_| {
            ScoreVector::new((0..frames).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap()
        })
        .collect();
    let gt_scores = gt_from_annotators(&annotator_scores).unwrap();
    VideoRecord {
        features: FeatureBundle {
            video_id: format!("toy_{seed}"),
            visual: Tensor2::zeros(frames, 2),
            text: Tensor2::zeros(2, 2),
            audio: Tensor2::zeros(frames, 2),
        },
        gt_scores,
        annotator_scores,
        segments,
    }
}

/// Criterion 1: end-to-end analytic gradients (fusion + transformer + head,
/// through the MSE loss) match central finite differences with max relative
/// error < 1e-4 on an 8-frame / 4-token toy video, in under 60 s.
#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let config = TransformerConfig {
        dim: 8,
        heads: 2,
        encoder_layers: 1,
        decoder_layers: 1,
        ff_dim: 16,
        ..TransformerConfig::default()
    };
    let dims = ModalityDims {
        visual: 5,
        text: 4,
        audio: 3,
    };
    let mut model = FrameScoringModel::new(config, dims, true, 11).unwrap();

    // Check at a generic parameter point: the 0.02 training init leaves some
    // attention gradients below finite-difference resolution at step 1e-5.
    let mut point_rng = ChaCha8Rng::seed_from_u64(12);
    for p in model.store_mut().iter_mut() {
        p.value = Tensor2::randn(p.value.rows(), p.value.cols(), 0.25, &mut point_rng);
    }

    let mut feature_rng = ChaCha8Rng::seed_from_u64(13);
    let features = FeatureBundle {
        video_id: "grad_toy".into(),
        visual: Tensor2::randn(8, 5, 1.0, &mut feature_rng),
        text: Tensor2::randn(4, 4, 1.0, &mut feature_rng),
        audio: Tensor2::randn(8, 3, 1.0, &mut feature_rng),
    };
    let target = Tensor2::from_fn(8, 1, |i, _| (i as f64 + 0.5) / 8.0);

    let tape = Tape::new();
    let binding = model.store().bind(&tape);
    let scores = model.forward_on_tape(&tape, &binding, &features);
    let loss = mse(&scores, &target);
    loss.backward();
    let analytic = gradients(&binding);

    let probe = model.clone();
    let probe_features = features.clone();
    let probe_target = target.clone();
    let loss_of = move |store: &framescore::numerics::ParamStore| {
        let tape = Tape::new();
        let binding = store.bind(&tape);
        let scores = probe.forward_on_tape(&tape, &binding, &probe_features);
        Ok(mse(&scores, &probe_target).scalar())
    };

    let check = finite_difference_check(model.store_mut(), &analytic, loss_of).unwrap();
    let max_rel = check.max_rel_error();
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "1 (gradient suite)",
        max_rel < 1e-4 && elapsed < 60.0,
        &format!(
            "max rel err {max_rel:.3e} over {} parameters (tol 1e-4), {elapsed:.1} s (limit 60 s)",
            check.per_param.len()
        ),
    );
}

/// Criterion 2: a single synthetic 8-frame video overfits to loss < 1e-3
/// within 2000 Adam steps at lr 1e-3, in under 2 minutes.
#[test]
fn criterion_2_overfit_single_video() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let config = SynthConfig {
        name: "overfit".into(),
        num_videos: 1,
        frames_min: 8,
        frames_max: 8,
        tokens_min: 4,
        tokens_max: 4,
        visual_dim: 16,
        text_dim: 12,
        audio_dim: 8,
        seed: 21,
        audio_dependent: true,
        score_noise: 0.05,
        annotator_noise: 0.05,
    };
    let (records, _) = generate_synthetic(&config, dir.path()).unwrap();
    let record = &records[0];

    let dims = ModalityDims::of(&record.features);
    let mut model = FrameScoringModel::new(TransformerConfig::default(), dims, true, 22).unwrap();
    let mut adam = AdamState::new(model.store(), 1e-3);

    let mut final_loss = f64::INFINITY;
    let mut steps = 0;
    for step in 1..=2000 {
        final_loss = model.train_step(&[record], &mut adam).unwrap();
        steps = step;
        if final_loss < 1e-3 {
            break;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "2 (overfit check)",
        final_loss < 1e-3 && elapsed < 120.0,
        &format!(
            "loss {final_loss:.2e} after {steps} steps (tol 1e-3), {elapsed:.1} s (limit 120 s)"
        ),
    );
}

/// Criterion 3: 40 audio-dependent synthetic videos, canonical setting,
/// 5 repeats; held-out mean Kendall tau against the planted true scores is
/// at least 0.6 and at least 0.3 above a uniform-random baseline, within
/// 15 minutes.
#[test]
fn criterion_3_synthetic_recovery() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let (records, planted) =
        generate_synthetic(&recovery_synth_config("recovery", 2024, true), dir.path()).unwrap();
    let dims = ModalityDims::of(&records[0].features);

    let mut model_taus = Vec::new();
    let mut random_taus = Vec::new();
    let mut baseline_rng = ChaCha8Rng::seed_from_u64(7777);

    for run in 1..=5u64 {
        let split = make_splits(
            std::slice::from_ref(&records),
            Setting::Canonical,
            100 + run,
            0.2,
        )
        .unwrap();
        let mut model =
            FrameScoringModel::new(TransformerConfig::default(), dims, true, 9000 + run).unwrap();
        let train_config = TrainConfig {
            epochs: 25,
            learning_rate: 1e-3,
            batch_size: 4,
            seed: 500 + run,
        };
        let log = fit(&mut model, &split.train, &train_config).unwrap();
        assert!(
            log.epoch_losses.last().unwrap() < log.epoch_losses.first().unwrap(),
            "run {run}: training did not reduce the loss: {:?}",
            log.epoch_losses
        );

        for record in &split.eval {
            let truth = planted.true_scores_for(record.video_id()).unwrap();
            let predicted = model.forward(&record.features).unwrap();
            model_taus.push(kendall_tau(truth, &predicted).unwrap());
            for _ in 0..20 {
                let noise: Vec<f64> = (0..record.frames())
                    .map(|_| baseline_rng.random_range(0.0..=1.0))
                    .collect();
                random_taus.push(kendall_tau(truth, &noise).unwrap());
            }
        }
    }

    let mean_tau = model_taus.iter().sum::<f64>() / model_taus.len() as f64;
    let mean_random = random_taus.iter().sum::<f64>() / random_taus.len() as f64;
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "3 (synthetic recovery)",
        mean_tau >= 0.6 && mean_tau - mean_random >= 0.3 && elapsed < 900.0,
        &format!(
            "held-out mean tau {mean_tau:.3} (>= 0.6), random baseline {mean_random:.3} \
             (margin {:.3} >= 0.3), {elapsed:.0} s (limit 900 s)",
            mean_tau - mean_random
        ),
    );
}

/// Criterion 4: on 200 random instances with <= 15 segments, the knapsack
/// DP objective equals the exhaustive-subset maximum in every instance.
#[test]
fn criterion_4_knapsack_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut matches = 0usize;
    const TRIALS: usize = 200;
    for _ in 0..TRIALS {
        let n = rng.random_range(1..=15);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let lengths: Vec<usize> = (0..n).map(|_| rng.random_range(1..15)).collect();
        let budget = rng.random_range(0..=lengths.iter().sum::<usize>() + 3);

        let lengths_i: Vec<i64> = lengths.iter().map(|&l| l as i64).collect();
        let selection = knapsack_select(&scores, &lengths_i, budget).unwrap();
        let dp_value: f64 = selection.selected_segments.iter().map(|&i| scores[i]).sum();

        let mut best = 0.0f64;
        for subset in 0u32..(1 << n) {
            let mut value = 0.0;
            let mut weight = 0usize;
            for i in 0..n {
                if subset >> i & 1 == 1 {
                    value += scores[i];
                    weight += lengths[i];
                }
            }
            if weight <= budget && value > best {
                best = value;
            }
        }
        if dp_value == best {
            matches += 1;
        }
    }
    report(
        "4 (knapsack oracle)",
        matches == TRIALS,
        &format!("{matches}/{TRIALS} instances match the exhaustive maximum"),
    );
}

/// Criterion 5: Kendall tau-b matches a definitional O(n^2) pair-counting
/// oracle exactly and Spearman rho matches a mid-rank + Pearson oracle
/// within 1e-12 on 100 random tie-containing vectors, plus the identity and
/// reversal checks.
#[test]
fn criterion_5_metric_oracles() {
    fn tau_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut con, mut dis, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in i + 1..n {
                use std::cmp::Ordering::*;
                match (
                    x[i].partial_cmp(&x[j]).unwrap(),
                    y[i].partial_cmp(&y[j]).unwrap(),
                ) {
                    (Equal, Equal) => {
                        tx += 1;
                        ty += 1;
                    }
                    (Equal, _) => tx += 1,
                    (_, Equal) => ty += 1,
                    (Less, Less) | (Greater, Greater) => con += 1,
                    _ => dis += 1,
                }
            }
        }
        let total = (n * (n - 1) / 2) as i64;
        let (dx, dy) = ((total - tx) as u64, (total - ty) as u64);
        if dx == 0 || dy == 0 {
            return 0.0;
        }
        (con - dis) as f64 / ((dx as f64) * (dy as f64)).sqrt()
    }

    fn rho_oracle(x: &[f64], y: &[f64]) -> f64 {
        let ranks = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|&vi| {
                    let less = v.iter().filter(|&&u| u < vi).count() as f64;
                    let equal = v.iter().filter(|&&u| u == vi).count() as f64;
                    less + (equal + 1.0) / 2.0
                })
                .collect()
        };
        let (rx, ry) = (ranks(x), ranks(y));
        let n = rx.len() as f64;
        let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
        let cov: f64 = rx.iter().zip(&ry).map(|(&a, &b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|&a| (a - mx) * (a - mx)).sum();
        let vy: f64 = ry.iter().map(|&b| (b - my) * (b - my)).sum();
        if vx == 0.0 || vy == 0.0 {
            return 0.0;
        }
        cov / (vx * vy).sqrt()
    }

    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut tau_exact = 0usize;
    let mut rho_close = 0usize;
    const TRIALS: usize = 100;
    for _ in 0..TRIALS {
        let n = rng.random_range(5..60);
        // Quantized values force plenty of ties.
        let gen = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n)
                .map(|_| (rng.random_range(0..8) as f64) / 7.0)
                .collect()
        };
        let x = gen(&mut rng);
        let y = gen(&mut rng);
        if kendall_tau(&x, &y).unwrap().to_bits() == tau_oracle(&x, &y).to_bits() {
            tau_exact += 1;
        }
        if (spearman_rho(&x, &y).unwrap() - rho_oracle(&x, &y)).abs() <= 1e-12 {
            rho_close += 1;
        }
    }

    let distinct = [0.3, 0.9, 0.1, 0.6, 0.4];
    let rank_reversed: Vec<f64> = distinct.iter().map(|&v| 1.0 - v).collect();
    let identity_ok = kendall_tau(&distinct, &distinct).unwrap() == 1.0
        && kendall_tau(&distinct, &rank_reversed).unwrap() == -1.0;

    report(
        "5 (metric oracles)",
        tau_exact == TRIALS && rho_close == TRIALS && identity_ok,
        &format!(
            "tau exact {tau_exact}/{TRIALS}, rho within 1e-12 {rho_close}/{TRIALS}, \
             tau(x,x)=1 and tau(x,rev x)=-1: {identity_ok}"
        ),
    );
}

/// Criterion 6: uniformly random model scores over 1000 synthetic
/// evaluations give a mean Kendall tau within +/-0.05 of zero.
#[test]
fn criterion_6_random_baseline() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let config = ProtocolConfig::default();
    let mut total = 0.0;
    let mut count = 0usize;
    for video in 0..50u64 {
        let record = toy_eval_record(6000 + video, 50, 3);
        for _ in 0..20 {
            let scores =
                ScoreVector::new((0..50).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap();
            let eval = evaluate_video(&scores, &record, &config).unwrap();
            total += eval.kendall_tau;
            count += 1;
        }
    }
    let mean = total / count as f64;
    report(
        "6 (random baseline)",
        count == 1000 && mean.abs() < 0.05,
        &format!("mean tau {mean:+.4} over {count} evaluations (|tau| < 0.05)"),
    );
}

/// Criterion 7: on audio-dependent synthetic data the with-audio F-score
/// beats or ties the without-audio F-score in at least 4 of 5 paired seeded
/// repeats; on audio-independent data the mean F delta stays below 0.05.
#[test]
fn criterion_7_ablation_direction() {
    let start = Instant::now();
    let small_model = TransformerConfig {
        dim: 32,
        heads: 4,
        encoder_layers: 1,
        decoder_layers: 1,
        ff_dim: 128,
        ..TransformerConfig::default()
    };
    let training = TrainConfig {
        epochs: 18,
        learning_rate: 1e-3,
        batch_size: 4,
        seed: 0,
    };
    let synth = |name: &str, seed: u64, audio: bool| SynthConfig {
        name: name.into(),
        num_videos: 28,
        frames_min: 32,
        frames_max: 64,
        tokens_min: 6,
        tokens_max: 12,
        visual_dim: 16,
        text_dim: 12,
        audio_dim: 8,
        seed,
        audio_dependent: audio,
        score_noise: 0.05,
        annotator_noise: 0.05,
    };
    let run = |config: &SynthConfig| {
        let data_dir = TempDir::new().unwrap();
        let (records, _) = generate_synthetic(config, data_dir.path()).unwrap();
        let plan = ExperimentPlan {
            setting: Setting::Canonical,
            datasets: vec![records],
            repeats: 5,
            eval_fraction: 0.2,
            base_seed: 40,
            audio_enabled: true,
            aggregation: Aggregation::Mean,
            budget_fraction: 0.15,
            model: small_model.clone(),
            training: training.clone(),
        };
        let out_dir = TempDir::new().unwrap();
        let mut tracker = OutputTracker::new(out_dir.path()).unwrap();
        run_ablation(&plan, &mut tracker).unwrap()
    };

    let dependent = run(&synth("audio_dep", 3001, true));
    let deltas = dependent.per_run_f_deltas();
    let wins = deltas.iter().filter(|&&d| d >= 0.0).count();

    let independent = run(&synth("audio_indep", 3002, false));
    let indep_delta = independent.mean_f_delta();

    let elapsed = start.elapsed().as_secs_f64();
    report(
        "7 (ablation direction)",
        wins >= 4 && indep_delta.abs() < 0.05,
        &format!(
            "audio-dependent wins {wins}/5 (deltas {:?}), audio-independent |mean delta| \
             {:.4} < 0.05, {elapsed:.0} s",
            deltas
                .iter()
                .map(|d| format!("{d:+.3}"))
                .collect::<Vec<_>>(),
            indep_delta.abs()
        ),
    );
}

/// Criterion 8: when the model scores equal one annotator's scores exactly,
/// the max-aggregated F-score protocol returns exactly 1.0.
#[test]
fn criterion_8_protocol_identity() {
    let mut all_exact = true;
    for seed in 0..10u64 {
        let record = toy_eval_record(8000 + seed, 40, 3);
        let annotator = (seed % 3) as usize;
        let model_scores = record.annotator_scores[annotator].clone();
        let f = f_score_protocol(&model_scores, &record, 0.15, Aggregation::Max).unwrap();
        if f != 1.0 {
            all_exact = false;
        }
    }
    report(
        "8 (protocol identity)",
        all_exact,
        "f == 1.0 exactly for 10 annotator-as-model videos under max aggregation",
    );
}

/// Criterion 9: rerunning an experiment with an identical config produces
/// byte-identical aggregate reports.
#[test]
fn criterion_9_determinism() {
    let data_dir = TempDir::new().unwrap();
    let synth = SynthConfig {
        name: "det".into(),
        num_videos: 8,
        frames_min: 16,
        frames_max: 32,
        tokens_min: 4,
        tokens_max: 8,
        visual_dim: 6,
        text_dim: 4,
        audio_dim: 4,
        seed: 99,
        audio_dependent: true,
        score_noise: 0.05,
        annotator_noise: 0.05,
    };
    generate_synthetic(&synth, data_dir.path()).unwrap();

    let config_text = format!(
        r#"
[experiment]
setting = "canonical"
datasets = ["{}"]
repeats = 2
eval_fraction = 0.2
base_seed = 5
audio_enabled = true
aggregation = "mean"
budget_fraction = 0.15

[model]
dim = 16
heads = 2
encoder_layers = 1
decoder_layers = 1
ff_dim = 32

[training]
epochs = 2
learning_rate = 1e-3
batch_size = 4
"#,
        data_dir.path().join("manifest.json").display()
    );
    let config_dir = TempDir::new().unwrap();
    let config_path = config_dir.path().join("exp.toml");
    fs::write(&config_path, &config_text).unwrap();

    let out_a = TempDir::new().unwrap();
    let out_b = TempDir::new().unwrap();
    framescore_cli::cmd_experiment(&config_path, None, out_a.path()).unwrap();
    framescore_cli::cmd_experiment(&config_path, None, out_b.path()).unwrap();

    let read = |root: &Path, rel: &str| fs::read(root.join(rel)).unwrap();
    let aggregate_identical = read(out_a.path(), "aggregate.txt")
        == read(out_b.path(), "aggregate.txt")
        && read(out_a.path(), "aggregate.csv") == read(out_b.path(), "aggregate.csv");
    let runs_identical = read(out_a.path(), "run_1/report.csv")
        == read(out_b.path(), "run_1/report.csv")
        && read(out_a.path(), "run_2/report.csv") == read(out_b.path(), "run_2/report.csv");

    report(
        "9 (determinism)",
        aggregate_identical && runs_identical,
        "aggregate and per-run reports byte-identical across reruns",
    );
}
