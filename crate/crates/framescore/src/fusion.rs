//! Modality fusion: per-modality projection into a shared space, a
//! text-attended visual representation via single-head cross-attention, and
//! audio fusion by concatenation + projection.
//!
//! Attention direction is fixed: frames are queries, caption tokens are keys
//! and values, so the attended output keeps one row per frame. Residual
//! connections wrap both the attention and the audio fusion. With audio
//! disabled, fusion is the identity on the attended sequence, which is the
//! unimodal-ablation baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureBundle;
use crate::error::{Error, Result};
use crate::numerics::autodiff::{affine, attention, Binding, ParamId, ParamStore, Tape, Var};
use crate::numerics::tensor::Tensor2;

/// Std of the seeded Gaussian used for all weight initialization.
pub const INIT_STD: f64 = 0.02;

/// Input feature widths per modality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityDims {
    pub visual: usize,
    pub text: usize,
    pub audio: usize,
}

impl ModalityDims {
    pub fn of(bundle: &FeatureBundle) -> Self {
        ModalityDims {
            visual: bundle.visual.cols(),
            text: bundle.text.cols(),
            audio: bundle.audio.cols(),
        }
    }
}

/// Projection, cross-attention, and fusion parameters. Owns only ids into a
/// shared [`ParamStore`].
#[derive(Clone, Debug)]
pub struct FusionLayer {
    pub shared_dim: usize,
    pub audio_enabled: bool,
    dims: ModalityDims,
    w_visual: ParamId,
    b_visual: ParamId,
    w_text: ParamId,
    b_text: ParamId,
    w_audio: ParamId,
    b_audio: ParamId,
    w_query: ParamId,
    w_key: ParamId,
    w_value: ParamId,
    w_fuse: ParamId,
    b_fuse: ParamId,
}

impl FusionLayer {
    pub fn new(
        store: &mut ParamStore,
        dims: ModalityDims,
        shared_dim: usize,
        audio_enabled: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let d = shared_dim;
        let mut weight = |name: &str, rows: usize, cols: usize| {
            store.add(
                format!("fusion.{name}"),
                Tensor2::randn(rows, cols, INIT_STD, rng),
            )
        };
        let w_visual = weight("visual.weight", dims.visual, d);
        let w_text = weight("text.weight", dims.text, d);
        let w_audio = weight("audio.weight", dims.audio, d);
        let w_query = weight("attn.query", d, d);
        let w_key = weight("attn.key", d, d);
        let w_value = weight("attn.value", d, d);
        let w_fuse = weight("fuse.weight", 2 * d, d);
        let b_visual = store.add("fusion.visual.bias", Tensor2::zeros(1, d));
        let b_text = store.add("fusion.text.bias", Tensor2::zeros(1, d));
        let b_audio = store.add("fusion.audio.bias", Tensor2::zeros(1, d));
        let b_fuse = store.add("fusion.fuse.bias", Tensor2::zeros(1, d));
        FusionLayer {
            shared_dim,
            audio_enabled,
            dims,
            w_visual,
            b_visual,
            w_text,
            b_text,
            w_audio,
            b_audio,
            w_query,
            w_key,
            w_value,
            w_fuse,
            b_fuse,
        }
    }

    pub fn dims(&self) -> ModalityDims {
        self.dims
    }

    /// Check a bundle's feature widths against the layer's.
    pub fn validate_bundle(&self, bundle: &FeatureBundle) -> Result<()> {
        let got = ModalityDims::of(bundle);
        if got != self.dims {
            return Err(Error::InvalidRecord {
                video_id: bundle.video_id.clone(),
                message: format!(
                    "feature dims {got:?} do not match the model's {:?}",
                    self.dims
                ),
            });
        }
        if bundle.frames() == 0 || bundle.text.rows() == 0 {
            return Err(Error::InvalidRecord {
                video_id: bundle.video_id.clone(),
                message: "empty feature matrix".into(),
            });
        }
        Ok(())
    }

    /// Affine-map each modality into the shared space: one row per frame for
    /// visual and audio, one per caption token for text.
    pub fn project_modalities(
        &self,
        binding: &Binding,
        visual: &Var,
        text: &Var,
        audio: &Var,
    ) -> (Var, Var, Var) {
        let v = affine(
            visual,
            binding.var(self.w_visual),
            binding.var(self.b_visual),
        );
        let t = affine(text, binding.var(self.w_text), binding.var(self.b_text));
        let a = affine(audio, binding.var(self.w_audio), binding.var(self.b_audio));
        (v, t, a)
    }

    /// Single-head cross-attention from frames to caption tokens, plus a
    /// residual on the projected visual sequence.
    pub fn text_attend(&self, binding: &Binding, visual: &Var, text: &Var) -> Var {
        let attended = self.text_attend_pre_residual(binding, visual, text);
        attended.add(visual)
    }

    /// The attention term alone (before the residual); exposed for tests.
    pub fn text_attend_pre_residual(&self, binding: &Binding, visual: &Var, text: &Var) -> Var {
        let query = visual.matmul(binding.var(self.w_query));
        let key = text.matmul(binding.var(self.w_key));
        let value = text.matmul(binding.var(self.w_value));
        attention(&query, &key, &value)
    }

    /// Concatenate attended and audio rows, project 2d -> d, add the
    /// attended residual. Identity on the attended sequence when audio is
    /// disabled.
    pub fn fuse_audio(&self, binding: &Binding, attended: &Var, audio: &Var) -> Var {
        if !self.audio_enabled {
            return attended.clone();
        }
        let merged = attended.concat_cols(audio);
        let fused = affine(&merged, binding.var(self.w_fuse), binding.var(self.b_fuse));
        fused.add(attended)
    }

    /// Full fusion pass for one bundle; returns the per-frame fused sequence
    /// (frames x shared_dim).
    pub fn forward(&self, tape: &Tape, binding: &Binding, bundle: &FeatureBundle) -> Var {
        let visual = tape.leaf(&bundle.visual);
        let text = tape.leaf(&bundle.text);
        let audio = tape.leaf(&bundle.audio);
        let (v, t, a) = self.project_modalities(binding, &visual, &text, &audio);
        let attended = self.text_attend(binding, &v, &t);
        self.fuse_audio(binding, &attended, &a)
    }

    /// Gradient-free fusion of one bundle, for inspecting the fused
    /// representation outside a training graph.
    pub fn fuse(&self, store: &ParamStore, bundle: &FeatureBundle) -> Result<FusedSequence> {
        self.validate_bundle(bundle)?;
        let tape = Tape::new();
        let binding = store.bind(&tape);
        let fused = self.forward(&tape, &binding, bundle);
        Ok(FusedSequence { h: fused.value() })
    }
}

/// Per-frame fused representation (frames x shared_dim).
#[derive(Clone, Debug)]
pub struct FusedSequence {
    pub h: Tensor2,
}

impl FusedSequence {
    pub fn frames(&self) -> usize {
        self.h.rows()
    }
}
