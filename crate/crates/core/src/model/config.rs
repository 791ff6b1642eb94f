use serde::{Deserialize, Serialize};

use super::ModelError;

/// Architecture hyperparameters.
///
/// The feed-forward width is `4·d_model`. The token table has `vocab_size + 1`
/// rows (the extra row is begin-of-row) and the positional table has
/// `num_columns + 1` rows. Attention has query and value biases only: a key
/// bias shifts every score in a row equally and so cannot change the
/// attention weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    /// |V|, column tokens only.
    pub vocab_size: usize,
    /// K.
    pub num_columns: usize,
}

impl ModelConfig {
    /// Desk-sized defaults: 3 layers, width 128, 4 heads.
    pub fn desk(vocab_size: usize, num_columns: usize) -> Self {
        Self {
            n_layers: 3,
            d_model: 128,
            n_heads: 4,
            vocab_size,
            num_columns,
        }
    }

    pub fn d_ff(&self) -> usize {
        4 * self.d_model
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            self.n_layers,
            self.d_model,
            self.n_heads,
            self.vocab_size,
            self.num_columns,
        ];
        if fields.contains(&0) {
            return Err(ModelError::InvalidConfig("all sizes must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    /// Closed-form parameter count.
    pub fn num_params(&self) -> usize {
        let d = self.d_model;
        let per_layer = 12 * d * d + 12 * d;
        (self.vocab_size + 1) * d + (self.num_columns + 1) * d + self.n_layers * per_layer + 2 * d
    }
}
