//! The token-set denoiser: additive semantic and positional embeddings,
//! radius-masked multi-head attention and timestep-conditioned adaptive
//! layer norms, plus training and closed-form Gaussian oracles.

mod encoding;
mod model;
mod oracle;
mod train;

use thiserror::Error;

pub use encoding::{
    build_attention_mask, centroid, pe_frequencies, set_positional_encoding, sinusoidal_pe_3d, timestep_embedding,
    PE_MAX_WAVELENGTH, PE_MIN_WAVELENGTH,
};
pub use model::{SigmaDenoiser, CONFIG_TENSOR};
pub use oracle::{oracle_gaussian_denoiser, GaussianOracle};
pub use train::{draw_training_noise, loss_and_grads, train_step, TrainDraw, Trainer, TrainingSet};

use crate::voxfield::CLASS_COUNT;

/// Semantic embedding rows: 20 classes plus NULL.
pub const SEMANTIC_VOCAB: usize = CLASS_COUNT + 1;

#[derive(Debug, Error)]
pub enum DenoiserError {
    #[error("invalid denoiser config: {0}")]
    Config(String),
    #[error("input mismatch: {0}")]
    Input(String),
    #[error("empty training batch")]
    EmptyBatch,
    #[error(transparent)]
    Tensor(#[from] micrograd::Error),
    #[error(transparent)]
    Diffusion(#[from] crate::diffusion::DiffusionError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiserConfig {
    /// `6n` for voxfields of `n` samples.
    pub token_dim: usize,
    pub model_dim: usize,
    pub layer_count: usize,
    pub head_count: usize,
    pub head_dim: usize,
    pub timestep_embedding_dim: usize,
    pub pe_dim: usize,
    /// Attention neighborhood in meters.
    pub attention_radius: f64,
}

impl DenoiserConfig {
    /// Desk-scale defaults for voxfields of `n` samples.
    pub fn desk(n: usize) -> Self {
        Self {
            token_dim: 6 * n,
            model_dim: 64,
            layer_count: 2,
            head_count: 4,
            head_dim: 16,
            timestep_embedding_dim: 64,
            pe_dim: 48,
            attention_radius: 3.0,
        }
    }

    pub fn validate(&self) -> Result<(), DenoiserError> {
        let bad = |m: String| Err(DenoiserError::Config(m));
        if self.token_dim == 0 || self.model_dim == 0 || self.head_count == 0 {
            return bad("token_dim, model_dim and head_count must be positive".into());
        }
        if self.model_dim != self.head_count * self.head_dim {
            return bad(format!(
                "model_dim {} != head_count {} × head_dim {}",
                self.model_dim, self.head_count, self.head_dim
            ));
        }
        if !(self.attention_radius.is_finite() && self.attention_radius > 0.0) {
            return bad(format!("attention_radius {} must be > 0", self.attention_radius));
        }
        if self.pe_dim == 0 || self.pe_dim % 6 != 0 {
            return bad(format!("pe_dim {} must be a positive multiple of 6", self.pe_dim));
        }
        if self.timestep_embedding_dim == 0 || self.timestep_embedding_dim % 2 != 0 {
            return bad(format!(
                "timestep_embedding_dim {} must be positive and even",
                self.timestep_embedding_dim
            ));
        }
        Ok(())
    }
}
