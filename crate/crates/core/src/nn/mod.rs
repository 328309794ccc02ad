//! Encoder-decoder transformer trained on metaphor-masked parallel data.
//!
//! The implementation is deliberately small: dense `f64` matrices, a
//! tape-based reverse pass, pre-layer-norm blocks, tied token embeddings
//! and greedy decoding. Checkpoints store `f32`.

mod matrix;
mod tape;

pub mod checkpoint;
pub mod decode;
pub mod model;
pub mod train;

use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matrix::Matrix;
pub use tape::{NodeId, Tape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{side} sequence is empty")]
    EmptySequence { side: &'static str },
    #[error("{side} sequence has length {len}, above max_len {max}")]
    TooLong { side: &'static str, len: usize, max: usize },
    #[error("{side} id {id} is outside the vocabulary of {vocab}")]
    IdOutOfRange { side: &'static str, id: u32, vocab: usize },
    #[error("source consists only of padding")]
    AllPadSource,
    #[error("every target position is padding")]
    AllPadTarget,
    #[error("logits have {rows} rows but there are {targets} targets")]
    Misaligned { rows: usize, targets: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("non-finite parameter {name} after step {step}")]
    NonFiniteParam { name: String, step: u64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TransformerConfig {
    /// Desk-scale configuration. `vocab_size` is normally replaced by the
    /// size of the dataset vocabulary.
    fn default() -> Self {
        Self {
            encoder_layers: 2,
            decoder_layers: 2,
            heads: 4,
            d_model: 64,
            d_ff: 256,
            vocab_size: 64,
            max_len: 64,
            dropout_rate: 0.1,
            seed: 0,
        }
    }
}

impl TransformerConfig {
    /// Six layers, eight heads, width 512 and a 30k-token vocabulary.
    pub fn paper() -> Self {
        Self {
            encoder_layers: 6,
            decoder_layers: 6,
            heads: 8,
            d_model: 512,
            d_ff: 2048,
            vocab_size: 30_005,
            max_len: 64,
            dropout_rate: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let dims = [
            ("encoder_layers", self.encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("heads", self.heads),
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("vocab_size", self.vocab_size),
            ("max_len", self.max_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(NnError::Config(alloc::format!("{name} must be at least 1")));
            }
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(NnError::Config(alloc::format!(
                "d_model {} is not divisible by heads {}",
                self.d_model,
                self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NnError::Config(alloc::format!(
                "dropout_rate {} is outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }
}
