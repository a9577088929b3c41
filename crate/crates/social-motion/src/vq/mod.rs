//! Discrete motion tokenizer: a temporal-convolution autoencoder whose
//! latent sequence is snapped to the nearest entries of an EMA-updated
//! codebook (4x temporal downsampling).

mod codebook;
mod model;
mod train;

pub use codebook::{quantize_latents, Codebook, QuantizeResult};
pub use model::{vq_decode, vq_encode, FeatureStats, VQModel};
pub use train::{
    codebook_ema_update, train_vq, vq_assignments, vq_backward, vq_loss, vq_train_step,
    LossReport, StepLatents, TrainCurve, VQTrainError,
};

use thiserror::Error;

use crate::xh3d::PersonFeatures;

#[derive(Debug, Error, PartialEq)]
pub enum VQError {
    #[error("config invalid: {0}")]
    BadConfig(String),
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error("latent width {got} does not match codebook dim {want}")]
    LatentWidth { got: usize, want: usize },
    #[error("sequence of {0} frames is too short to tokenize (need >= 4)")]
    TooShort(usize),
    #[error("token id {id} out of range for codebook of {size}")]
    TokenOutOfRange { id: u32, size: usize },
    #[error("feature width {got} does not match model width {want}")]
    FeatureWidth { got: usize, want: usize },
}

/// Tokenizer hyperparameters. `downsample` is fixed at 4; encoder/decoder
/// channel widths and the latent dimension are free.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VQConfig {
    pub feature_dim: usize,
    pub codebook_size: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub downsample: usize,
    pub commitment_weight: f64,
    pub velocity_weight: f64,
    pub ema_decay: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Training window length in frames, multiple of 4.
    pub window: usize,
    pub iterations: usize,
    /// Steps a code may stay unused before it is re-seeded from the batch.
    pub dead_code_steps: usize,
    pub seed: u64,
}

impl Default for VQConfig {
    fn default() -> Self {
        VQConfig {
            feature_dim: 263,
            codebook_size: 512,
            latent_dim: 512,
            hidden_dim: 512,
            downsample: 4,
            commitment_weight: 0.25,
            velocity_weight: 0.5,
            ema_decay: 0.99,
            learning_rate: 2e-4,
            batch_size: 16,
            window: 64,
            iterations: 3000,
            dead_code_steps: 256,
            seed: 0,
        }
    }
}

impl VQConfig {
    pub fn validate(&self) -> Result<(), VQError> {
        if self.codebook_size < 2 {
            return Err(VQError::BadConfig(format!(
                "codebook size must be >= 2, got {}",
                self.codebook_size
            )));
        }
        if self.latent_dim < 1 {
            return Err(VQError::BadConfig("latent dim must be >= 1".to_string()));
        }
        if self.downsample != 4 {
            return Err(VQError::BadConfig(format!(
                "downsample factor is fixed at 4, got {}",
                self.downsample
            )));
        }
        if !(self.commitment_weight > 0.0) {
            return Err(VQError::BadConfig("commitment weight must be positive".to_string()));
        }
        if !self.window.is_multiple_of(4) || self.window == 0 {
            return Err(VQError::BadConfig(format!(
                "window must be a positive multiple of 4, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Cut each feature matrix into non-overlapping `window`-frame pieces,
/// dropping short tails.
pub fn slice_windows(features: &[PersonFeatures], window: usize) -> Vec<PersonFeatures> {
    let mut out = Vec::new();
    for f in features {
        let width = f.width();
        let mut start = 0;
        while start + window <= f.frames {
            out.push(PersonFeatures {
                joints: f.joints,
                fps: f.fps,
                frames: window,
                data: f.data[start * width..(start + window) * width].to_vec(),
            });
            start += window;
        }
    }
    out
}
