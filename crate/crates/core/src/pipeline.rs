//! End-to-end training: corpus text to vocabulary, GloVe embedding and a
//! trained network.

use crate::corpus::{tokenize, windows_from_ids, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::glove::{cooccurrence_from_ids, glove_fit, EmbeddingMatrix, GloveConfig};
use crate::neural::{train_with_progress, EpochStats, NetworkConfig, NetworkParams, TrainingHistory};

#[derive(Clone, Debug, PartialEq)]
pub struct PreparedCorpus {
    pub vocab: Vocabulary,
    pub ids: Vec<WordId>,
}

pub fn prepare_corpus(text: &str) -> Result<PreparedCorpus> {
    let tokens = tokenize(text);
    let vocab = Vocabulary::build(&tokens)?;
    let ids = vocab.encode(&tokens).ids;
    Ok(PreparedCorpus { vocab, ids })
}

impl PreparedCorpus {
    /// Encodes another text against this vocabulary; unknown words map to
    /// the sentinel.
    pub fn encode_text(&self, text: &str) -> Vec<WordId> {
        self.vocab.encode(&tokenize(text)).ids
    }

    pub fn embedding(&self, cfg: &GloveConfig) -> Result<EmbeddingMatrix> {
        let cooc = cooccurrence_from_ids(&self.ids, self.vocab.len(), Some(self.vocab.unknown_id()), cfg.window);
        Ok(glove_fit(&cooc, cfg)?.embedding)
    }
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub corpus: PreparedCorpus,
    pub embedding: EmbeddingMatrix,
    pub params: NetworkParams,
    pub history: TrainingHistory,
    pub config: NetworkConfig,
}

/// Both phases: the embedding is fitted first, then frozen while the rest of
/// the network trains.
pub fn train_model(
    text: &str,
    glove: &GloveConfig,
    cfg: &NetworkConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainedModel> {
    if glove.dim != cfg.embedding_dim {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension {} differs from network input {}",
            glove.dim, cfg.embedding_dim
        )));
    }
    let corpus = prepare_corpus(text)?;
    let embedding = corpus.embedding(glove)?;
    let windows = windows_from_ids(&corpus.ids, cfg.context_length)?;
    let (params, history) = train_with_progress(&windows, &embedding, cfg, on_epoch)?;
    Ok(TrainedModel {
        corpus,
        embedding,
        params,
        history,
        config: cfg.clone(),
    })
}
