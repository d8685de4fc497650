//! On-disk multimodal dataset format, validation, synthetic generation with
//! a planted scorer, and train/eval splits.
//!
//! A dataset is a directory holding `manifest.json` plus one headerless
//! binary payload per feature matrix and per annotator score track. Payloads
//! are little-endian 32-bit floats, row-major; the manifest declares every
//! shape, and a payload's byte length must equal rows x cols x 4 exactly.
//! Values are widened to f64 on load.

use std::fs;
use std::io::ErrorKind;
use std::ops::Deref;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matmul;
use crate::numerics::tensor::{sigmoid_scalar, softmax_rows, Tensor2};

/// Simulated annotators per synthetic video.
pub const SYNTH_ANNOTATORS: usize = 3;

/// Per-frame scores in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite score at index {i}")));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Numeric(format!(
                    "score {v} at index {i} outside [0, 1]"
                )));
            }
        }
        Ok(ScoreVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// As an N x 1 column for regression targets.
    pub fn as_column(&self) -> Tensor2 {
        Tensor2::from_vec(self.0.len(), 1, self.0.clone()).expect("scores are finite")
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Aligned per-video modality features. `visual` and `audio` have one row
/// per frame; `text` has one row per caption token.
#[derive(Clone, Debug)]
pub struct FeatureBundle {
    pub video_id: String,
    pub visual: Tensor2,
    pub text: Tensor2,
    pub audio: Tensor2,
}

impl FeatureBundle {
    pub fn frames(&self) -> usize {
        self.visual.rows()
    }
}

/// A fully validated video: features, aggregated ground truth, raw
/// annotator tracks, and the temporal segment partition.
#[derive(Clone, Debug)]
pub struct VideoRecord {
    pub features: FeatureBundle,
    pub gt_scores: ScoreVector,
    pub annotator_scores: Vec<ScoreVector>,
    /// Half-open `[start, end)` intervals partitioning `[0, frames)`.
    pub segments: Vec<(usize, usize)>,
}

impl VideoRecord {
    pub fn video_id(&self) -> &str {
        &self.features.video_id
    }

    pub fn frames(&self) -> usize {
        self.features.frames()
    }
}

/// Manifest entry for one video. Paths are relative to the manifest file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VideoEntry {
    pub id: String,
    pub frames: usize,
    pub caption_tokens: usize,
    pub visual_dim: usize,
    pub text_dim: usize,
    pub audio_dim: usize,
    pub visual_path: String,
    pub text_path: String,
    pub audio_path: String,
    pub annotator_paths: Vec<String>,
    pub segments: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub videos: Vec<VideoEntry>,
}

/// Read a little-endian f32 payload of exactly rows x cols values, widened
/// to f64.
fn read_f32_matrix(
    path: &Path,
    rows: usize,
    cols: usize,
    video_id: &str,
    field: &str,
) -> Result<Tensor2> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            Error::Io {
                path: path.to_path_buf(),
                source: e,
            }
        } else {
            Error::io(path, e)
        }
    })?;
    let expected = (rows * cols * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::PayloadSize {
            video_id: video_id.to_string(),
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
            rows,
            cols,
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                video_id: video_id.to_string(),
                field: field.to_string(),
                index: i,
            });
        }
        data.push(v as f64);
    }
    Ok(Tensor2::from_vec(rows, cols, data).expect("length checked above"))
}

/// Write a matrix as a headerless little-endian f32 payload.
pub fn write_f32_matrix(path: &Path, matrix: &Tensor2) -> Result<()> {
    let mut bytes = Vec::with_capacity(matrix.data().len() * 4);
    for &v in matrix.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn validate_segments(segments: &[(usize, usize)], frames: usize, video_id: &str) -> Result<()> {
    let mut cursor = 0usize;
    for (index, &(start, end)) in segments.iter().enumerate() {
        if start < cursor {
            return Err(Error::SegmentOverlap {
                video_id: video_id.to_string(),
                index,
                start,
                end,
            });
        }
        if start > cursor {
            return Err(Error::SegmentGap {
                video_id: video_id.to_string(),
                frame: cursor,
            });
        }
        if end <= start {
            return Err(Error::InvalidRecord {
                video_id: video_id.to_string(),
                message: format!("segment {index} [{start}, {end}) is empty or reversed"),
            });
        }
        cursor = end;
    }
    if cursor != frames {
        return Err(Error::SegmentGap {
            video_id: video_id.to_string(),
            frame: cursor,
        });
    }
    Ok(())
}

/// Mean the annotator tracks per frame, then min-max normalize to [0, 1]
/// per video. A constant mean maps to all zeros.
pub fn gt_from_annotators(annotators: &[ScoreVector]) -> Result<ScoreVector> {
    if annotators.is_empty() {
        return Err(Error::EmptyInput("annotator score list"));
    }
    let n = annotators[0].len();
    for a in annotators {
        if a.len() != n {
            return Err(Error::LengthMismatch {
                op: "gt_from_annotators",
                lhs: n,
                rhs: a.len(),
            });
        }
    }
    let mut mean = vec![0.0; n];
    for a in annotators {
        for (m, &v) in mean.iter_mut().zip(a.values()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= annotators.len() as f64;
    }
    let lo = mean.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let normalized = if range > 0.0 {
        mean.iter()
            .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; n]
    };
    ScoreVector::new(normalized)
}

pub fn load_manifest(manifest_path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::ManifestParse {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Load and fully validate every video a manifest declares. Any invariant
/// violation aborts with the offending video id.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<VideoRecord>> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::with_capacity(manifest.videos.len());
    for entry in &manifest.videos {
        records.push(load_video(base, entry)?);
    }
    Ok(records)
}

fn load_video(base: &Path, entry: &VideoEntry) -> Result<VideoRecord> {
    let id = &entry.id;
    if entry.frames == 0 {
        return Err(Error::InvalidRecord {
            video_id: id.clone(),
            message: "frame count must be at least 1".into(),
        });
    }
    if entry.caption_tokens == 0 {
        return Err(Error::InvalidRecord {
            video_id: id.clone(),
            message: "caption token count must be at least 1".into(),
        });
    }
    if entry.annotator_paths.is_empty() {
        return Err(Error::InvalidRecord {
            video_id: id.clone(),
            message: "at least one annotator track is required".into(),
        });
    }

    let visual = read_f32_matrix(
        &base.join(&entry.visual_path),
        entry.frames,
        entry.visual_dim,
        id,
        "visual",
    )?;
    let text = read_f32_matrix(
        &base.join(&entry.text_path),
        entry.caption_tokens,
        entry.text_dim,
        id,
        "text",
    )?;
    let audio = read_f32_matrix(
        &base.join(&entry.audio_path),
        entry.frames,
        entry.audio_dim,
        id,
        "audio",
    )?;

    let mut annotators = Vec::with_capacity(entry.annotator_paths.len());
    for (k, rel) in entry.annotator_paths.iter().enumerate() {
        let field = format!("annotator {k}");
        let track = read_f32_matrix(&base.join(rel), entry.frames, 1, id, &field)?;
        for (i, &v) in track.data().iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ScoreOutOfRange {
                    video_id: id.clone(),
                    field,
                    index: i,
                    value: v,
                });
            }
        }
        annotators.push(ScoreVector::new(track.into_data()).expect("validated above"));
    }

    validate_segments(&entry.segments, entry.frames, id)?;
    let gt_scores = gt_from_annotators(&annotators)?;

    Ok(VideoRecord {
        features: FeatureBundle {
            video_id: id.clone(),
            visual,
            text,
            audio,
        },
        gt_scores,
        annotator_scores: annotators,
        segments: entry.segments.clone(),
    })
}

/// Configuration for [`generate_synthetic`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub name: String,
    pub num_videos: usize,
    pub frames_min: usize,
    pub frames_max: usize,
    pub tokens_min: usize,
    pub tokens_max: usize,
    pub visual_dim: usize,
    pub text_dim: usize,
    pub audio_dim: usize,
    pub seed: u64,
    /// When false the planted scorer's audio coefficients are zero, so
    /// scores are independent of the audio stream.
    #[serde(default = "default_true")]
    pub audio_dependent: bool,
    /// Gaussian noise added inside the planted sigmoid.
    #[serde(default = "default_score_noise")]
    pub score_noise: f64,
    /// Half-width of the uniform noise separating annotators from the
    /// planted truth.
    #[serde(default = "default_annotator_noise")]
    pub annotator_noise: f64,
}

fn default_true() -> bool {
    true
}

fn default_score_noise() -> f64 {
    0.05
}

fn default_annotator_noise() -> f64 {
    0.05
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_videos == 0 {
            return Err(Error::Config("num_videos must be at least 1".into()));
        }
        if self.frames_min == 0 || self.frames_min > self.frames_max {
            return Err(Error::Config(format!(
                "degenerate frame range [{}, {}]",
                self.frames_min, self.frames_max
            )));
        }
        if self.tokens_min == 0 || self.tokens_min > self.tokens_max {
            return Err(Error::Config(format!(
                "degenerate token range [{}, {}]",
                self.tokens_min, self.tokens_max
            )));
        }
        for (name, d) in [
            ("visual_dim", self.visual_dim),
            ("text_dim", self.text_dim),
            ("audio_dim", self.audio_dim),
        ] {
            if d == 0 || d % 2 != 0 {
                return Err(Error::Config(format!(
                    "{name} must be even and nonzero, got {d}"
                )));
            }
        }
        if !(self.score_noise.is_finite() && self.score_noise >= 0.0) {
            return Err(Error::Config("score_noise must be nonnegative".into()));
        }
        if !(0.0..=0.5).contains(&self.annotator_noise) {
            return Err(Error::Config("annotator_noise must be in [0, 0.5]".into()));
        }
        Ok(())
    }
}

/// The hidden scoring function a synthetic dataset is built from, plus the
/// per-video true scores. Written as `planted.json` beside the manifest;
/// ignored by [`load_dataset`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub scorer: PlantedScorer,
    pub videos: Vec<PlantedVideo>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlantedScorer {
    pub visual_coeff: Vec<f64>,
    pub text_coeff: Vec<f64>,
    pub audio_coeff: Vec<f64>,
    /// Bilinear map conditioning the text attention pool on the frame's
    /// visual features (visual_dim x text_dim, row-major).
    pub pool_map: Vec<f64>,
    pub score_noise: f64,
    pub audio_dependent: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlantedVideo {
    pub id: String,
    pub true_scores: Vec<f64>,
}

impl PlantedTruth {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::ManifestParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn true_scores_for(&self, video_id: &str) -> Option<&[f64]> {
        self.videos
            .iter()
            .find(|v| v.id == video_id)
            .map(|v| v.true_scores.as_slice())
    }
}

/// Gaussian sample rounded through f32, so in-memory values match what the
/// payload round-trips to.
fn sample_f32(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (z * std) as f32 as f64
}

fn sample_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2 {
    let data = (0..rows * cols).map(|_| sample_f32(rng, 1.0)).collect();
    Tensor2::from_vec(rows, cols, data).expect("finite samples")
}

/// Seeded segment lengths of 5-15 frames; the final segment absorbs the
/// remainder and may be shorter.
fn sample_segments(rng: &mut ChaCha8Rng, frames: usize) -> Vec<(usize, usize)> {
    let mut segments = Vec::new();
    let mut start = 0usize;
    while start < frames {
        let len: usize = rng.random_range(5..=15);
        let end = (start + len).min(frames);
        segments.push((start, end));
        start = end;
    }
    segments
}

/// Write a seeded synthetic dataset to `out_dir` and return the records it
/// contains (identical to what [`load_dataset`] reproduces) plus the planted
/// truth. Layout: `manifest.json`, `planted.json`, and per-video payloads.
pub fn generate_synthetic(
    config: &SynthConfig,
    out_dir: &Path,
) -> Result<(Vec<VideoRecord>, PlantedTruth)> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Coefficient scales chosen so each enabled modality contributes O(1)
    // variance to the sigmoid argument; audio gets a larger share so that
    // ablating it is clearly visible.
    let visual_scale = 1.0 / (config.visual_dim as f64).sqrt();
    let text_scale = 1.0 / (config.text_dim as f64).sqrt();
    let audio_scale = if config.audio_dependent {
        1.5 / (config.audio_dim as f64).sqrt()
    } else {
        0.0
    };
    let visual_coeff: Vec<f64> = (0..config.visual_dim)
        .map(|_| sample_f32(&mut rng, visual_scale))
        .collect();
    let text_coeff: Vec<f64> = (0..config.text_dim)
        .map(|_| sample_f32(&mut rng, text_scale))
        .collect();
    let audio_coeff: Vec<f64> = (0..config.audio_dim)
        .map(|_| sample_f32(&mut rng, audio_scale))
        .collect();
    let pool_scale = 2.0 / ((config.visual_dim * config.text_dim) as f64).sqrt();
    let pool_map_data: Vec<f64> = (0..config.visual_dim * config.text_dim)
        .map(|_| sample_f32(&mut rng, pool_scale))
        .collect();
    let pool_map = Tensor2::from_vec(config.visual_dim, config.text_dim, pool_map_data.clone())
        .expect("finite samples");

    let mut entries = Vec::with_capacity(config.num_videos);
    let mut records = Vec::with_capacity(config.num_videos);
    let mut planted_videos = Vec::with_capacity(config.num_videos);

    for v in 0..config.num_videos {
        let id = format!("{}_{v:04}", config.name);
        let frames = rng.random_range(config.frames_min..=config.frames_max);
        let tokens = rng.random_range(config.tokens_min..=config.tokens_max);

        let visual = sample_matrix(&mut rng, frames, config.visual_dim);
        let text = sample_matrix(&mut rng, tokens, config.text_dim);
        let audio = sample_matrix(&mut rng, frames, config.audio_dim);

        // Planted raw score per frame: visual + attention-pooled text +
        // audio terms plus Gaussian noise, squashed and min-max normalized.
        let pool_logits = matmul(
            &matmul(&visual, &pool_map).expect("dims match"),
            &text.transpose(),
        )
        .expect("dims match");
        let pool_weights = softmax_rows(&pool_logits);
        let pooled_text = matmul(&pool_weights, &text).expect("dims match");

        let mut raw = Vec::with_capacity(frames);
        for f in 0..frames {
            let v_term: f64 = visual
                .row(f)
                .iter()
                .zip(&visual_coeff)
                .map(|(&x, &c)| x * c)
                .sum();
            let t_term: f64 = pooled_text
                .row(f)
                .iter()
                .zip(&text_coeff)
                .map(|(&x, &c)| x * c)
                .sum();
            let a_term: f64 = audio
                .row(f)
                .iter()
                .zip(&audio_coeff)
                .map(|(&x, &c)| x * c)
                .sum();
            let noise: f64 = rng.sample::<f64, _>(StandardNormal) * config.score_noise;
            raw.push(sigmoid_scalar(v_term + t_term + a_term + noise));
        }
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let true_scores: Vec<f64> = if range > 0.0 {
            raw.iter().map(|&x| (x - lo) / range).collect()
        } else {
            vec![0.0; frames]
        };

        let mut annotators = Vec::with_capacity(SYNTH_ANNOTATORS);
        for _ in 0..SYNTH_ANNOTATORS {
            let track: Vec<f64> = true_scores
                .iter()
                .map(|&s| {
                    let noise = rng.random_range(-config.annotator_noise..=config.annotator_noise);
                    ((s + noise).clamp(0.0, 1.0) as f32) as f64
                })
                .collect();
            annotators.push(ScoreVector::new(track).expect("clamped to [0, 1]"));
        }

        let segments = sample_segments(&mut rng, frames);

        let visual_path = format!("{id}.visual.bin");
        let text_path = format!("{id}.text.bin");
        let audio_path = format!("{id}.audio.bin");
        let annotator_paths: Vec<String> = (0..SYNTH_ANNOTATORS)
            .map(|k| format!("{id}.ann{k}.bin"))
            .collect();

        write_f32_matrix(&out_dir.join(&visual_path), &visual)?;
        write_f32_matrix(&out_dir.join(&text_path), &text)?;
        write_f32_matrix(&out_dir.join(&audio_path), &audio)?;
        for (path, track) in annotator_paths.iter().zip(&annotators) {
            write_f32_matrix(&out_dir.join(path), &track.as_column())?;
        }

        entries.push(VideoEntry {
            id: id.clone(),
            frames,
            caption_tokens: tokens,
            visual_dim: config.visual_dim,
            text_dim: config.text_dim,
            audio_dim: config.audio_dim,
            visual_path,
            text_path,
            audio_path,
            annotator_paths,
            segments: segments.clone(),
        });

        let gt_scores = gt_from_annotators(&annotators)?;
        records.push(VideoRecord {
            features: FeatureBundle {
                video_id: id.clone(),
                visual,
                text,
                audio,
            },
            gt_scores,
            annotator_scores: annotators,
            segments,
        });
        planted_videos.push(PlantedVideo { id, true_scores });
    }

    let manifest = DatasetManifest {
        dataset: config.name.clone(),
        videos: entries,
    };
    let manifest_path = out_dir.join("manifest.json");
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail");
    fs::write(&manifest_path, manifest_json).map_err(|e| Error::io(&manifest_path, e))?;

    let planted = PlantedTruth {
        scorer: PlantedScorer {
            visual_coeff,
            text_coeff,
            audio_coeff,
            pool_map: pool_map_data,
            score_noise: config.score_noise,
            audio_dependent: config.audio_dependent,
        },
        videos: planted_videos,
    };
    let planted_path = out_dir.join("planted.json");
    let planted_json =
        serde_json::to_string_pretty(&planted).expect("planted serialization cannot fail");
    fs::write(&planted_path, planted_json).map_err(|e| Error::io(&planted_path, e))?;

    Ok((records, planted))
}

/// The three experimental settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// One dataset, seeded shuffle, 80/20 split.
    Canonical,
    /// Two datasets merged into one, then 80/20.
    Augment,
    /// Train on the first dataset, evaluate on the whole second one.
    Transfer,
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Setting::Canonical),
            "augment" => Ok(Setting::Augment),
            "transfer" => Ok(Setting::Transfer),
            other => Err(Error::Config(format!(
                "unknown setting {other:?}; expected canonical, augment, or transfer"
            ))),
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Setting::Canonical => "canonical",
            Setting::Augment => "augment",
            Setting::Transfer => "transfer",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: Vec<VideoRecord>,
    pub eval: Vec<VideoRecord>,
}

/// Build train/eval sets for a setting. Canonical takes exactly one dataset,
/// augment and transfer take exactly two. `eval_fraction` applies to the
/// shuffled pool in canonical/augment; transfer uses both datasets whole.
pub fn make_splits(
    datasets: &[Vec<VideoRecord>],
    setting: Setting,
    seed: u64,
    eval_fraction: f64,
) -> Result<Split> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::Config(format!(
            "eval_fraction must be in (0, 1), got {eval_fraction}"
        )));
    }
    let expected = match setting {
        Setting::Canonical => 1,
        Setting::Augment | Setting::Transfer => 2,
    };
    if datasets.len() != expected {
        return Err(Error::Config(format!(
            "{setting} setting needs exactly {expected} dataset(s), got {}",
            datasets.len()
        )));
    }

    match setting {
        Setting::Transfer => {
            for (i, d) in datasets.iter().enumerate() {
                if d.is_empty() {
                    return Err(Error::Config(format!("dataset {i} is empty")));
                }
            }
            Ok(Split {
                train: datasets[0].clone(),
                eval: datasets[1].clone(),
            })
        }
        Setting::Canonical | Setting::Augment => {
            let pool: Vec<VideoRecord> = datasets.iter().flatten().cloned().collect();
            if pool.len() < 2 {
                return Err(Error::Config(
                    "need at least 2 videos to split into train and eval".into(),
                ));
            }
            let mut indices: Vec<usize> = (0..pool.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            shuffle(&mut indices, &mut rng);

            let eval_count =
                ((pool.len() as f64 * eval_fraction).round() as usize).clamp(1, pool.len() - 1);
            let (eval_idx, train_idx) = indices.split_at(eval_count);
            let pick = |idx: &[usize]| -> Vec<VideoRecord> {
                let mut sorted: Vec<usize> = idx.to_vec();
                sorted.sort_unstable();
                sorted.into_iter().map(|i| pool[i].clone()).collect()
            };
            Ok(Split {
                train: pick(train_idx),
                eval: pick(eval_idx),
            })
        }
    }
}

/// Fisher-Yates with our seeded generator.
fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}
