//! Shared fixtures for the benchmarks: the demo corpus with a randomly
//! initialised network at desk scale.

use quill_core::corpus::{windows_from_ids, TrainingWindow};
use quill_core::neural::{NetworkConfig, NetworkParams};
use quill_core::pipeline::{prepare_corpus, PreparedCorpus};
use quill_core::{EmbeddingMatrix, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEMO_CORPUS: &str = include_str!("../../../data/demo_corpus.txt");

pub struct Fixture {
    pub corpus: PreparedCorpus,
    pub embedding: EmbeddingMatrix,
    pub params: NetworkParams,
    pub windows: Vec<TrainingWindow>,
    pub config: NetworkConfig,
}

/// The embedding is random rather than fitted so that building the fixture
/// stays cheap.
pub fn fixture() -> Fixture {
    let config = NetworkConfig {
        learning_rate: 1e-3,
        epochs: 1,
        ..NetworkConfig::default()
    };
    let corpus = prepare_corpus(DEMO_CORPUS).expect("demo corpus tokenizes");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let embedding = EmbeddingMatrix::new(Tensor::uniform(
        &[corpus.vocab.len(), config.embedding_dim],
        0.5,
        &mut rng,
    ))
    .expect("finite");
    let params = NetworkParams::init(embedding.clone(), config.hidden_size, &mut rng);
    let windows = windows_from_ids(&corpus.ids, config.context_length).expect("corpus longer than context");
    Fixture {
        corpus,
        embedding,
        params,
        windows,
        config,
    }
}
