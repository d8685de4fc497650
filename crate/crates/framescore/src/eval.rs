//! Summary-based and rank-based evaluation: segment scoring, exact 0/1
//! knapsack selection under a frame budget, precision/recall/F against
//! annotator summaries, and tie-aware Kendall's tau / Spearman's rho.

use serde::{Deserialize, Serialize};

use crate::data::{ScoreVector, VideoRecord};
use crate::error::{Error, Result};
use crate::model::FrameScoringModel;

/// Fraction of frames a summary may use, by convention.
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.15;

/// How per-annotator F-scores combine into one number per video.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Best-matching annotator (multiple-ground-truth convention).
    Max,
    /// Mean over annotators (score-annotation convention).
    Mean,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregation::Max),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::Config(format!(
                "unknown aggregation {other:?}; expected max or mean"
            ))),
        }
    }
}

impl std::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregation::Max => "max",
            Aggregation::Mean => "mean",
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub budget_fraction: f64,
    pub aggregation: Aggregation,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            budget_fraction: DEFAULT_BUDGET_FRACTION,
            aggregation: Aggregation::Mean,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "budget_fraction must be in (0, 1], got {}",
                self.budget_fraction
            )));
        }
        Ok(())
    }
}

/// A budgeted summary: per-frame mask, the chosen segment indices, and the
/// total selected frame count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SummarySelection {
    pub mask: Vec<bool>,
    pub selected_segments: Vec<usize>,
    pub selected_frames: usize,
}

/// Mean frame score per segment. Segments must partition `[0, len)`.
pub fn segment_scores(frame_scores: &[f64], segments: &[(usize, usize)]) -> Result<Vec<f64>> {
    let mut cursor = 0usize;
    let mut out = Vec::with_capacity(segments.len());
    for &(start, end) in segments {
        if start != cursor || end <= start || end > frame_scores.len() {
            return Err(Error::Config(format!(
                "segments do not partition [0, {}): offending segment [{start}, {end})",
                frame_scores.len()
            )));
        }
        let sum: f64 = frame_scores[start..end].iter().sum();
        out.push(sum / (end - start) as f64);
        cursor = end;
    }
    if cursor != frame_scores.len() {
        return Err(Error::Config(format!(
            "segments cover only [0, {cursor}) of [0, {})",
            frame_scores.len()
        )));
    }
    Ok(out)
}

/// Exact 0/1 knapsack: maximize total segment score subject to the summed
/// segment lengths staying within `budget_frames`. Ties break toward fewer
/// total frames, then toward the selection containing the lowest differing
/// segment index. Segments are laid out contiguously in order, so the frame
/// mask follows from the lengths.
pub fn knapsack_select(
    segment_scores: &[f64],
    segment_lengths: &[i64],
    budget_frames: usize,
) -> Result<SummarySelection> {
    if segment_scores.len() != segment_lengths.len() {
        return Err(Error::LengthMismatch {
            op: "knapsack_select",
            lhs: segment_scores.len(),
            rhs: segment_lengths.len(),
        });
    }
    if let Some(&bad) = segment_lengths.iter().find(|&&l| l < 0) {
        return Err(Error::Config(format!("negative segment length {bad}")));
    }

    let n = segment_scores.len();
    let lengths: Vec<usize> = segment_lengths.iter().map(|&l| l as usize).collect();
    // More budget than total length buys nothing; keep the DP table bounded.
    let budget_frames = budget_frames.min(lengths.iter().sum());
    let words = n.div_ceil(64).max(1);

    #[derive(Clone)]
    struct Cell {
        value: f64,
        frames: usize,
        picks: Vec<u64>,
    }

    // `candidate` wins on higher value, then fewer frames, then on holding
    // the smallest segment index on which the two selections differ.
    fn better(candidate: &Cell, incumbent: &Cell) -> bool {
        if candidate.value != incumbent.value {
            return candidate.value > incumbent.value;
        }
        if candidate.frames != incumbent.frames {
            return candidate.frames < incumbent.frames;
        }
        for (c, i) in candidate.picks.iter().zip(&incumbent.picks) {
            let diff = c ^ i;
            if diff != 0 {
                let lowest = diff.trailing_zeros();
                return c >> lowest & 1 == 1;
            }
        }
        false
    }

    let empty = Cell {
        value: 0.0,
        frames: 0,
        picks: vec![0u64; words],
    };
    let mut dp = vec![empty; budget_frames + 1];

    for (i, (&score, &len)) in segment_scores.iter().zip(&lengths).enumerate() {
        if len > budget_frames {
            continue;
        }
        for w in (len..=budget_frames).rev() {
            let mut candidate = dp[w - len].clone();
            candidate.value += score;
            candidate.frames += len;
            candidate.picks[i / 64] |= 1u64 << (i % 64);
            if better(&candidate, &dp[w]) {
                dp[w] = candidate;
            }
        }
    }

    let best = &dp[budget_frames];
    let selected_segments: Vec<usize> = (0..n)
        .filter(|&i| best.picks[i / 64] >> (i % 64) & 1 == 1)
        .collect();

    let total_frames: usize = lengths.iter().sum();
    let mut mask = vec![false; total_frames];
    let mut start = 0usize;
    let mut selected_frames = 0usize;
    for (i, &len) in lengths.iter().enumerate() {
        if best.picks[i / 64] >> (i % 64) & 1 == 1 {
            for m in &mut mask[start..start + len] {
                *m = true;
            }
            selected_frames += len;
        }
        start += len;
    }
    debug_assert!(selected_frames <= budget_frames);

    Ok(SummarySelection {
        mask,
        selected_segments,
        selected_frames,
    })
}

/// Frame-level overlap metrics between a predicted and a reference summary.
/// Empty selections define the corresponding ratio as 0.
pub fn precision_recall_f(
    predicted: &SummarySelection,
    reference: &SummarySelection,
) -> Result<(f64, f64, f64)> {
    if predicted.mask.len() != reference.mask.len() {
        return Err(Error::LengthMismatch {
            op: "precision_recall_f",
            lhs: predicted.mask.len(),
            rhs: reference.mask.len(),
        });
    }
    let overlap = predicted
        .mask
        .iter()
        .zip(&reference.mask)
        .filter(|(&p, &r)| p && r)
        .count() as f64;
    let pred_size = predicted.mask.iter().filter(|&&b| b).count() as f64;
    let ref_size = reference.mask.iter().filter(|&&b| b).count() as f64;
    let precision = if pred_size > 0.0 {
        overlap / pred_size
    } else {
        0.0
    };
    let recall = if ref_size > 0.0 {
        overlap / ref_size
    } else {
        0.0
    };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((precision, recall, f))
}

/// Build the budgeted summary for a score track over a segment partition.
/// The budget is ceil(budget_fraction x frames).
pub fn summarize(
    frame_scores: &[f64],
    segments: &[(usize, usize)],
    budget_fraction: f64,
) -> Result<SummarySelection> {
    let scores = segment_scores(frame_scores, segments)?;
    let lengths: Vec<i64> = segments.iter().map(|&(s, e)| (e - s) as i64).collect();
    let budget = (budget_fraction * frame_scores.len() as f64).ceil() as usize;
    knapsack_select(&scores, &lengths, budget)
}

/// Precision/recall/F of model scores against every annotator's summary,
/// aggregated per the config. Under max aggregation the reported triple is
/// the one of the best-F annotator (first on ties).
pub fn summary_metrics(
    model_scores: &ScoreVector,
    record: &VideoRecord,
    config: &ProtocolConfig,
) -> Result<(f64, f64, f64)> {
    config.validate()?;
    if model_scores.len() != record.frames() {
        return Err(Error::LengthMismatch {
            op: "summary_metrics",
            lhs: model_scores.len(),
            rhs: record.frames(),
        });
    }
    let model_summary = summarize(model_scores, &record.segments, config.budget_fraction)?;
    let mut triples = Vec::with_capacity(record.annotator_scores.len());
    for annotator in &record.annotator_scores {
        let reference = summarize(annotator, &record.segments, config.budget_fraction)?;
        triples.push(precision_recall_f(&model_summary, &reference)?);
    }
    Ok(aggregate_triples(&triples, config.aggregation))
}

fn aggregate_triples(triples: &[(f64, f64, f64)], aggregation: Aggregation) -> (f64, f64, f64) {
    match aggregation {
        Aggregation::Max => *triples
            .iter()
            .reduce(|best, t| if t.2 > best.2 { t } else { best })
            .expect("at least one annotator"),
        Aggregation::Mean => {
            let n = triples.len() as f64;
            let sum = triples.iter().fold((0.0, 0.0, 0.0), |acc, t| {
                (acc.0 + t.0, acc.1 + t.1, acc.2 + t.2)
            });
            (sum.0 / n, sum.1 / n, sum.2 / n)
        }
    }
}

/// The F-score protocol for one video: knapsack summaries from model scores
/// and from each annotator's scores, F against each, aggregated.
pub fn f_score_protocol(
    model_scores: &ScoreVector,
    record: &VideoRecord,
    budget_fraction: f64,
    aggregation: Aggregation,
) -> Result<f64> {
    let config = ProtocolConfig {
        budget_fraction,
        aggregation,
    };
    summary_metrics(model_scores, record, &config).map(|(_, _, f)| f)
}

fn check_pair(op: &'static str, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            op,
            lhs: x.len(),
            rhs: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Config(format!(
            "{op} needs at least 2 observations, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Tie-corrected Kendall's tau-b via sort + merge counting:
/// (concordant - discordant) / sqrt((n0 - ties_x)(n0 - ties_y)).
/// Returns 0 when either input is constant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair("kendall_tau", x, y)?;
    let n = x.len();

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .expect("finite scores")
            .then(y[a].partial_cmp(&y[b]).expect("finite scores"))
    });
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    // Pairs tied on x, and jointly tied on (x, y).
    let mut ties_x: u64 = 0;
    let mut ties_joint: u64 = 0;
    let mut run = 1u64;
    let mut joint_run = 1u64;
    for i in 1..n {
        if xs[i] == xs[i - 1] {
            run += 1;
            if ys[i] == ys[i - 1] {
                joint_run += 1;
            } else {
                ties_joint += joint_run * (joint_run - 1) / 2;
                joint_run = 1;
            }
        } else {
            ties_x += run * (run - 1) / 2;
            run = 1;
            ties_joint += joint_run * (joint_run - 1) / 2;
            joint_run = 1;
        }
    }
    ties_x += run * (run - 1) / 2;
    ties_joint += joint_run * (joint_run - 1) / 2;

    // Discordant pairs = inversions of y once sorted by (x, y).
    let swaps = merge_count_inversions(&mut ys);

    // Pairs tied on y, from the now fully sorted ys.
    let mut ties_y: u64 = 0;
    run = 1;
    for i in 1..n {
        if ys[i] == ys[i - 1] {
            run += 1;
        } else {
            ties_y += run * (run - 1) / 2;
            run = 1;
        }
    }
    ties_y += run * (run - 1) / 2;

    let total = (n as u64) * (n as u64 - 1) / 2;
    let denom_x = total - ties_x;
    let denom_y = total - ties_y;
    if denom_x == 0 || denom_y == 0 {
        return Ok(0.0);
    }
    let concordant_minus_discordant =
        total as i64 - ties_x as i64 - ties_y as i64 + ties_joint as i64 - 2 * swaps as i64;
    Ok(concordant_minus_discordant as f64 / ((denom_x as f64) * (denom_y as f64)).sqrt())
}

/// Count inversions while merge-sorting in place.
fn merge_count_inversions(values: &mut [f64]) -> u64 {
    let n = values.len();
    let mut buffer = vec![0.0; n];
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start + width < n {
            let mid = start + width;
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if values[j] < values[i] {
                    buffer[k] = values[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buffer[k] = values[i];
                    i += 1;
                }
                k += 1;
            }
            buffer[k..end].copy_from_slice(if i < mid {
                &values[i..mid]
            } else {
                &values[j..end]
            });
            values[start..end].copy_from_slice(&buffer[start..end]);
            start = end;
        }
        width *= 2;
    }
    swaps
}

/// Mid-ranks (average rank across ties), 1-based.
fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite scores"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &orig in &idx[i..=j] {
            ranks[orig] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of mid-ranks. Returns 0 when either
/// input is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair("spearman_rho", x, y)?;
    let rx = mid_ranks(x);
    let ry = mid_ranks(y);
    let n = rx.len() as f64;
    let mean_x = rx.iter().sum::<f64>() / n;
    let mean_y = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in rx.iter().zip(&ry) {
        cov += (a - mean_x) * (b - mean_y);
        var_x += (a - mean_x) * (a - mean_x);
        var_y += (b - mean_y) * (b - mean_y);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VideoEval {
    pub video_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub kendall_tau: f64,
    pub spearman_rho: f64,
}

/// Per-video metrics plus dataset means. Rank correlations are computed per
/// annotator per video and averaged; the per-video mean is reported.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub aggregation: Aggregation,
    pub budget_fraction: f64,
    pub per_video: Vec<VideoEval>,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub kendall_tau: f64,
    pub spearman_rho: f64,
}

/// Evaluate model scores for one video against its annotators.
pub fn evaluate_video(
    model_scores: &ScoreVector,
    record: &VideoRecord,
    config: &ProtocolConfig,
) -> Result<VideoEval> {
    let (precision, recall, f_score) = summary_metrics(model_scores, record, config)?;
    let mut tau_sum = 0.0;
    let mut rho_sum = 0.0;
    for annotator in &record.annotator_scores {
        tau_sum += kendall_tau(annotator, model_scores)?;
        rho_sum += spearman_rho(annotator, model_scores)?;
    }
    let k = record.annotator_scores.len() as f64;
    Ok(VideoEval {
        video_id: record.video_id().to_string(),
        precision,
        recall,
        f_score,
        kendall_tau: tau_sum / k,
        spearman_rho: rho_sum / k,
    })
}

/// Run the model over an evaluation set and compute the full report.
pub fn evaluate(
    model: &FrameScoringModel,
    records: &[VideoRecord],
    config: &ProtocolConfig,
) -> Result<EvalReport> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let mut per_video = Vec::with_capacity(records.len());
    for record in records {
        let scores = model.forward(&record.features)?;
        per_video.push(evaluate_video(&scores, record, config)?);
    }
    let n = per_video.len() as f64;
    let mean = |f: fn(&VideoEval) -> f64| per_video.iter().map(f).sum::<f64>() / n;
    Ok(EvalReport {
        aggregation: config.aggregation,
        budget_fraction: config.budget_fraction,
        precision: mean(|v| v.precision),
        recall: mean(|v| v.recall),
        f_score: mean(|v| v.f_score),
        kendall_tau: mean(|v| v.kendall_tau),
        spearman_rho: mean(|v| v.spearman_rho),
        per_video,
    })
}

impl EvalReport {
    /// Human-readable table: one row per video plus a mean row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "aggregation: {}  budget_fraction: {:.4}\n",
            self.aggregation, self.budget_fraction
        ));
        out.push_str(&format!(
            "{:<24} {:>10} {:>10} {:>10} {:>12} {:>12}\n",
            "video", "precision", "recall", "f_score", "kendall_tau", "spearman_rho"
        ));
        for v in &self.per_video {
            out.push_str(&format!(
                "{:<24} {:>10.6} {:>10.6} {:>10.6} {:>12.6} {:>12.6}\n",
                v.video_id, v.precision, v.recall, v.f_score, v.kendall_tau, v.spearman_rho
            ));
        }
        out.push_str(&format!(
            "{:<24} {:>10.6} {:>10.6} {:>10.6} {:>12.6} {:>12.6}\n",
            "mean", self.precision, self.recall, self.f_score, self.kendall_tau, self.spearman_rho
        ));
        out
    }

    /// Comma-separated table with the same rows as [`EvalReport::to_text`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("video_id,precision,recall,f_score,kendall_tau,spearman_rho\n");
        for v in &self.per_video {
            out.push_str(&format!(
                "{},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                v.video_id, v.precision, v.recall, v.f_score, v.kendall_tau, v.spearman_rho
            ));
        }
        out.push_str(&format!(
            "mean,{:.9},{:.9},{:.9},{:.9},{:.9}\n",
            self.precision, self.recall, self.f_score, self.kendall_tau, self.spearman_rho
        ));
        out
    }
}
