use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::activations::cross_entropy;
use super::adam::{adam_update, AdamState};
use super::network::{accumulate_gradients, forward, predict_probs, Mode, NetworkParams};
use super::predict::argmax;
use super::NetworkConfig;
use crate::corpus::TrainingWindow;
use crate::error::{Error, Result};
use crate::glove::EmbeddingMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Running mean cross-entropy of the epoch's updates, dropout active.
    pub train_loss: f64,
    /// Mean cross-entropy over all training windows, eval mode, measured
    /// after the epoch's updates.
    pub mean_loss: f64,
    /// Top-1 next-word accuracy over all training windows, measured in the
    /// same pass as `mean_loss`.
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainingHistory {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

pub fn train(
    windows: &[TrainingWindow],
    embedding: &EmbeddingMatrix,
    cfg: &NetworkConfig,
) -> Result<(NetworkParams, TrainingHistory)> {
    train_with_progress(windows, embedding, cfg, |_| {})
}

/// Mini-batch Adam over shuffled windows with the embedding frozen.
/// Deterministic for a given `cfg.seed`.
pub fn train_with_progress(
    windows: &[TrainingWindow],
    embedding: &EmbeddingMatrix,
    cfg: &NetworkConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(NetworkParams, TrainingHistory)> {
    cfg.validate()?;
    if windows.is_empty() {
        return Err(Error::InvalidArgument("no training windows".into()));
    }
    if embedding.dim() != cfg.embedding_dim {
        return Err(Error::DimensionMismatch {
            what: "embedding dimension",
            expected: cfg.embedding_dim,
            actual: embedding.dim(),
        });
    }
    let vocab_size = embedding.vocab_size();
    for w in windows {
        if w.context.len() != cfg.context_length {
            return Err(Error::DimensionMismatch {
                what: "window context length",
                expected: cfg.context_length,
                actual: w.context.len(),
            });
        }
        if let Some(&id) = w.context.iter().chain([&w.target]).find(|&&id| id as usize >= vocab_size) {
            return Err(Error::IdOutOfRange { id, vocab_size });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = NetworkParams::init(embedding.clone(), cfg.hidden_size, &mut rng);
    let mut adam = AdamState::new(&params.weights);
    let mut grads = params.weights.zeros_like();
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = TrainingHistory::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.clear();
            let mut batch_loss = 0.0;
            for &i in batch {
                let w = &windows[i];
                let mode = Mode::Train {
                    dropout: cfg.dropout_rate,
                    rng: &mut rng,
                };
                let (probs, cache) = forward(&params, &w.context, mode)?;
                batch_loss += cross_entropy(&probs, w.target as usize);
                accumulate_gradients(&params, &cache, w.target, &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: batch_no });
            }
            total_loss += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            adam_update(&mut params.weights, &grads, &mut adam, cfg.learning_rate).map_err(|e| match e {
                Error::NonFiniteGradient { .. } => Error::Diverged { epoch, batch: batch_no },
                other => other,
            })?;
        }
        let (mean_loss, accuracy) = evaluate(&params, windows)?;
        let stats = EpochStats {
            epoch,
            train_loss: total_loss / windows.len() as f64,
            mean_loss,
            accuracy,
        };
        on_epoch(&stats);
        history.epochs.push(stats);
    }
    Ok((params, history))
}

/// Eval-mode mean cross-entropy and top-1 accuracy over `windows`.
pub fn evaluate(params: &NetworkParams, windows: &[TrainingWindow]) -> Result<(f64, f64)> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument("no windows".into()));
    }
    let mut loss = 0.0;
    let mut hits = 0usize;
    for w in windows {
        let probs = predict_probs(params, &w.context)?;
        loss += cross_entropy(&probs, w.target as usize);
        if argmax(&probs) == w.target as usize {
            hits += 1;
        }
    }
    let n = windows.len() as f64;
    Ok((loss / n, hits as f64 / n))
}
