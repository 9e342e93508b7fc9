//! The word-level next-word predictor, trained from scratch.

mod activations;
mod adam;
mod dropout;
mod lstm;
mod network;
pub(crate) mod predict;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use activations::{cross_entropy, sigmoid, softmax, PROBABILITY_FLOOR};
pub use adam::{adam_update, AdamState};
pub use dropout::{dropout, Phase};
pub use lstm::{lstm_step, Gate, LstmLayerParams, LstmStepCache};
pub use network::{
    backward, forward, forward_with_masks, predict_probs, DenseLayer, DropoutMasks, ForwardCache, Gradients, Mode,
    NetworkParams, Weights,
};
pub use predict::{argmax, predict_topk, CandidateFilter};
pub use train::{evaluate, train, train_with_progress, EpochStats, TrainingHistory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkConfig {
    pub context_length: usize,
    pub hidden_size: usize,
    pub embedding_dim: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            context_length: 6,
            hidden_size: 64,
            embedding_dim: 100,
            dropout_rate: 0.2,
            learning_rate: 1e-4,
            epochs: 100,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.context_length == 0 {
            return Err(Error::InvalidConfig("context length must be at least 1".into()));
        }
        if self.hidden_size == 0 || self.embedding_dim == 0 {
            return Err(Error::InvalidConfig("layer sizes must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig("learning rate must be finite and non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        Ok(())
    }
}
