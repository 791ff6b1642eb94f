//! Decoder-only transformer over column tokens, with per-column logit
//! masking, chain-rule loss and autoregressive sampling.

mod checkpoint;
mod config;
mod decode;
mod sample;
mod transformer;

use thiserror::Error;

pub use checkpoint::{layout_for, Checkpoint, CheckpointHeader, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use transformer::{mask_logits, softmax, Model};

use crate::autodiff::AutodiffError;
use crate::data::DataError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("sequence length {len} exceeds the maximum {max}")]
    PrefixTooLong { len: usize, max: usize },
    #[error("token {token} at position {position} is outside its column range")]
    TokenOutOfRange { position: usize, token: u32 },
    #[error("row has {got} tokens, expected {expected}")]
    RowWidth { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint schema does not match its recorded hash")]
    SchemaHashMismatch,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
