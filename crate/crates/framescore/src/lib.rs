//! Frame-importance scoring for video summarization.
//!
//! The pipeline: per-frame visual, caption-token text, and per-frame audio
//! feature matrices are projected into a shared space and fused (text
//! cross-attention, then audio fusion); an encoder-decoder transformer
//! regresses per-frame importance scores; summaries are selected by a
//! segment knapsack and scored with F-measure and rank correlations.
//!
//! Modules:
//! - [`numerics`]: tensors, reverse-mode autodiff, Adam, gradient checking
//! - [`data`]: on-disk dataset format, synthetic generation, splits
//! - [`fusion`]: modality projection, text attention, audio fusion
//! - [`model`]: the frame-scoring transformer and its training loop
//! - [`eval`]: knapsack summaries, F-score, Kendall's tau, Spearman's rho

pub mod data;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
