//! Corpus-conditioned predictive writing.
//!
//! The pipeline runs in two phases: word vectors are fit on the corpus with
//! GloVe ([`glove`]), then a two-layer LSTM next-word predictor with two dense
//! layers and a softmax head is trained on top of the frozen vectors
//! ([`neural`]). The [`engine`] module turns a trained model into the
//! interactive substitution/suggestion and seed-line generation tools, and
//! [`evaluation`] holds the n-gram similarity, missing-word robustness and
//! configuration sweep experiments. An order-k Markov chain ([`markov`]) serves
//! as a baseline.

pub mod corpus;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod glove;
pub mod markov;
pub mod model_file;
pub mod neural;
pub mod pipeline;
pub mod tensor;

pub use corpus::{
    detokenize, levenshtein, make_windows, nearest_word, tokenize, EncodedCorpus, Token,
    TokenKind, TrainingWindow, Vocabulary, WordId, UNKNOWN_TOKEN,
};
pub use engine::{Classic, EngineState, GenerateOptions, Generated, Substitution, Suggestion};
pub use error::{Error, Result};
pub use evaluation::{ngram_similarity, robustness_curve, RobustnessReport, SimilarityReport, SweepRow};
pub use glove::{CooccurrenceMatrix, EmbeddingMatrix, GloveConfig};
pub use markov::MarkovModel;
pub use model_file::{load_model, save_model};
pub use neural::{NetworkConfig, NetworkParams, TrainingHistory};
pub use pipeline::{prepare_corpus, train_model, PreparedCorpus, TrainedModel};
pub use tensor::Tensor;
