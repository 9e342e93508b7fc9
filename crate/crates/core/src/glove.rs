//! Phase one: GloVe word vectors fit on the training corpus.
//!
//! Co-occurrences are counted in a symmetric window with `1/d` distance
//! weighting, then word and context vectors are fit to `ln x_ij` by weighted
//! least squares with per-parameter AdaGrad step sizes. The exported
//! embedding is the sum of the word and context vectors.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedCorpus, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::tensor::{dot, Tensor};

const GRADIENT_CLIP: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GloveConfig {
    pub dim: usize,
    pub window: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        GloveConfig {
            dim: 100,
            window: 10,
            x_max: 100.0,
            alpha: 0.75,
            epochs: 50,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

impl GloveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("GloVe dim must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidConfig("GloVe window must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("GloVe alpha {} not in (0, 1]", self.alpha)));
        }
        if self.x_max.is_nan() || self.x_max <= 0.0 {
            return Err(Error::InvalidConfig(format!("GloVe x_max {} must be positive", self.x_max)));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("GloVe learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Sparse symmetric co-occurrence counts. Entries are kept ordered so that
/// fitting is reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceMatrix {
    vocab_size: usize,
    unknown_id: Option<WordId>,
    entries: BTreeMap<(WordId, WordId), f64>,
}

impl CooccurrenceMatrix {
    pub fn new(vocab_size: usize, unknown_id: Option<WordId>) -> Self {
        CooccurrenceMatrix {
            vocab_size,
            unknown_id,
            entries: BTreeMap::new(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn unknown_id(&self) -> Option<WordId> {
        self.unknown_id
    }

    pub fn get(&self, i: WordId, j: WordId) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Adds `weight` to both `(i, j)` and `(j, i)`.
    pub fn add_symmetric(&mut self, i: WordId, j: WordId, weight: f64) {
        assert!((i as usize) < self.vocab_size && (j as usize) < self.vocab_size);
        if weight <= 0.0 {
            return;
        }
        *self.entries.entry((i, j)).or_insert(0.0) += weight;
        *self.entries.entry((j, i)).or_insert(0.0) += weight;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, WordId, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &x)| (i, j, x))
    }
}

pub fn build_cooccurrence(corpus: &EncodedCorpus<'_>, window: usize) -> CooccurrenceMatrix {
    cooccurrence_from_ids(&corpus.ids, corpus.vocab.len(), Some(corpus.vocab.unknown_id()), window)
}

pub fn cooccurrence_from_ids(
    ids: &[WordId],
    vocab_size: usize,
    unknown_id: Option<WordId>,
    window: usize,
) -> CooccurrenceMatrix {
    let mut m = CooccurrenceMatrix::new(vocab_size, unknown_id);
    for (t, &a) in ids.iter().enumerate() {
        if Some(a) == unknown_id {
            continue;
        }
        for d in 1..=window {
            let Some(&b) = ids.get(t + d) else { break };
            if Some(b) == unknown_id {
                continue;
            }
            m.add_symmetric(a, b, 1.0 / d as f64);
        }
    }
    m
}

/// `(x / x_max)^alpha` below the cutoff, 1 at or above it.
pub fn glove_weight(x: f64, cfg: &GloveConfig) -> f64 {
    if x < cfg.x_max {
        (x / cfg.x_max).powf(cfg.alpha)
    } else {
        1.0
    }
}

/// Word vectors, context vectors and their biases.
#[derive(Clone, Debug, PartialEq)]
pub struct GloveParams {
    pub word: Tensor,
    pub context: Tensor,
    pub word_bias: Vec<f64>,
    pub context_bias: Vec<f64>,
}

impl GloveParams {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        GloveParams {
            word: Tensor::zeros(&[vocab_size, dim]),
            context: Tensor::zeros(&[vocab_size, dim]),
            word_bias: vec![0.0; vocab_size],
            context_bias: vec![0.0; vocab_size],
        }
    }

    fn init(vocab_size: usize, dim: usize, unknown_id: Option<WordId>, rng: &mut ChaCha8Rng) -> Self {
        let bound = 0.5 / dim as f64;
        let mut p = GloveParams {
            word: Tensor::uniform(&[vocab_size, dim], bound, rng),
            context: Tensor::uniform(&[vocab_size, dim], bound, rng),
            word_bias: Tensor::uniform(&[vocab_size], bound, rng).into_data(),
            context_bias: Tensor::uniform(&[vocab_size], bound, rng).into_data(),
        };
        if let Some(u) = unknown_id {
            let u = u as usize;
            p.word.row_mut(u).fill(0.0);
            p.context.row_mut(u).fill(0.0);
            p.word_bias[u] = 0.0;
            p.context_bias[u] = 0.0;
        }
        p
    }

    /// `w + ŵ` per word.
    pub fn combined(&self) -> EmbeddingMatrix {
        let mut t = self.word.clone();
        for (a, b) in t.data_mut().iter_mut().zip(self.context.data()) {
            *a += b;
        }
        EmbeddingMatrix(t)
    }
}

/// Weighted least-squares objective `Σ f(x_ij) (w_i·ŵ_j + b_i + b̂_j − ln x_ij)²`.
pub fn glove_objective(cooc: &CooccurrenceMatrix, params: &GloveParams, cfg: &GloveConfig) -> f64 {
    cooc.iter()
        .map(|(i, j, x)| {
            let (i, j) = (i as usize, j as usize);
            let diff = dot(params.word.row(i), params.context.row(j))
                + params.word_bias[i]
                + params.context_bias[j]
                - x.ln();
            glove_weight(x, cfg) * diff * diff
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct GloveFit {
    pub embedding: EmbeddingMatrix,
    pub params: GloveParams,
    /// Objective before training followed by the value after each epoch.
    pub objective_history: Vec<f64>,
}

impl GloveFit {
    pub fn initial_objective(&self) -> f64 {
        self.objective_history[0]
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().expect("history holds the initial value")
    }
}

pub fn glove_fit(cooc: &CooccurrenceMatrix, cfg: &GloveConfig) -> Result<GloveFit> {
    cfg.validate()?;
    if cooc.is_empty() {
        return Err(Error::EmptyCooccurrence);
    }
    let v = cooc.vocab_size();
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p = GloveParams::init(v, dim, cooc.unknown_id(), &mut rng);

    let mut sq_word = Tensor::filled(&[v, dim], 1.0);
    let mut sq_context = Tensor::filled(&[v, dim], 1.0);
    let mut sq_word_bias = vec![1.0f64; v];
    let mut sq_context_bias = vec![1.0f64; v];

    let mut entries: Vec<(usize, usize, f64, f64)> = cooc
        .iter()
        .map(|(i, j, x)| (i as usize, j as usize, x.ln(), glove_weight(x, cfg)))
        .collect();

    let mut history = vec![glove_objective(cooc, &p, cfg)];
    let mut grad_word = vec![0.0; dim];
    let mut grad_context = vec![0.0; dim];
    let lr = cfg.learning_rate;

    for epoch in 1..=cfg.epochs {
        entries.shuffle(&mut rng);
        for &(i, j, log_x, weight) in &entries {
            let diff = dot(p.word.row(i), p.context.row(j)) + p.word_bias[i] + p.context_bias[j] - log_x;
            let fdiff = weight * diff;
            for d in 0..dim {
                grad_word[d] = (fdiff * p.context.row(j)[d]).clamp(-GRADIENT_CLIP, GRADIENT_CLIP);
                grad_context[d] = (fdiff * p.word.row(i)[d]).clamp(-GRADIENT_CLIP, GRADIENT_CLIP);
            }
            adagrad_step(p.word.row_mut(i), sq_word.row_mut(i), &grad_word, lr);
            adagrad_step(p.context.row_mut(j), sq_context.row_mut(j), &grad_context, lr);
            let gb = fdiff.clamp(-GRADIENT_CLIP, GRADIENT_CLIP);
            p.word_bias[i] -= lr * gb / sq_word_bias[i].sqrt();
            sq_word_bias[i] += gb * gb;
            p.context_bias[j] -= lr * gb / sq_context_bias[j].sqrt();
            sq_context_bias[j] += gb * gb;
        }
        let objective = glove_objective(cooc, &p, cfg);
        if !objective.is_finite() {
            return Err(Error::GloveDiverged { epoch });
        }
        history.push(objective);
    }

    let mut embedding = p.combined();
    if let Some(u) = cooc.unknown_id() {
        embedding.0.row_mut(u as usize).fill(0.0);
    }
    Ok(GloveFit {
        embedding,
        params: p,
        objective_history: history,
    })
}

fn adagrad_step(param: &mut [f64], sq: &mut [f64], grad: &[f64], lr: f64) {
    for ((w, s), &g) in param.iter_mut().zip(sq.iter_mut()).zip(grad) {
        *w -= lr * g / s.sqrt();
        *s += g * g;
    }
}

/// Convenience wrapper: co-occurrence counting plus fit over an encoded corpus.
pub fn fit_corpus_embedding(corpus: &EncodedCorpus<'_>, cfg: &GloveConfig) -> Result<GloveFit> {
    let cooc = build_cooccurrence(corpus, cfg.window);
    glove_fit(&cooc, cfg)
}

/// `|V| × d` word vectors. Row `id` is the vector of word `id`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix(Tensor);

impl EmbeddingMatrix {
    pub fn new(t: Tensor) -> Result<Self> {
        if t.shape().len() != 2 {
            return Err(Error::InvalidArgument("embedding must be a matrix".into()));
        }
        if !t.is_finite() {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        Ok(EmbeddingMatrix(t))
    }

    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        EmbeddingMatrix(Tensor::zeros(&[vocab_size, dim]))
    }

    pub fn vocab_size(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, id: WordId) -> &[f64] {
        self.0.row(id as usize)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub(crate) fn tensor_mut(&mut self) -> &mut Tensor {
        &mut self.0
    }

    /// `word v1 v2 … vd`, one word per line.
    pub fn write_text<W: Write>(&self, vocab: &Vocabulary, mut out: W) -> io::Result<()> {
        for (id, word) in vocab.words().iter().enumerate() {
            write!(out, "{word}")?;
            for v in self.0.row(id) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
