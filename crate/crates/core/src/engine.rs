//! Interactive tools over a trained model: the substitution/suggestion
//! writing aid and seed-line story generation.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{detokenize, nearest_word, tokenize, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::markov::MarkovModel;
use crate::neural::predict::top_k_from_probs;
use crate::neural::{predict_probs, CandidateFilter, NetworkConfig, NetworkParams};

/// A greedy context seen more than this many times during one generation
/// run takes its second-ranked word once.
pub const LOOP_GUARD_REPEATS: usize = 3;

const BUNDLED_CLASSICS: &str = include_str!("../../../data/classics.tsv");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classic {
    pub title: String,
    pub line: String,
}

/// Parses `title<TAB>opening line` rows. Blank lines are ignored.
pub fn parse_classics(tsv: &str) -> Result<Vec<Classic>> {
    let mut out: Vec<Classic> = Vec::new();
    for (n, raw) in tsv.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let (title, line) = raw
            .split_once('\t')
            .ok_or_else(|| Error::InvalidArgument(format!("classics line {}: missing tab", n + 1)))?;
        let (title, line) = (title.trim(), line.trim());
        if title.is_empty() || line.is_empty() {
            return Err(Error::InvalidArgument(format!("classics line {}: empty field", n + 1)));
        }
        if out.iter().any(|c| c.title == title) {
            return Err(Error::InvalidArgument(format!("duplicate classics title {title:?}")));
        }
        out.push(Classic {
            title: title.to_owned(),
            line: line.to_owned(),
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("classics catalog is empty".into()));
    }
    Ok(out)
}

pub fn load_classics(path: impl AsRef<Path>) -> Result<Vec<Classic>> {
    parse_classics(&fs::read_to_string(path)?)
}

/// The catalog shipped in `data/classics.tsv`.
pub fn default_classics() -> Vec<Classic> {
    parse_classics(BUNDLED_CLASSICS).expect("bundled catalog is well formed")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub word: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub substitutions: Vec<Substitution>,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Replace out-of-vocabulary seed words with their nearest neighbour
    /// instead of dropping them.
    pub substitute: bool,
    pub loop_guard: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            substitute: false,
            loop_guard: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub processed_seed: Vec<String>,
    pub continuation: Vec<String>,
}

impl Generated {
    pub fn processed_seed_text(&self) -> String {
        detokenize(&self.processed_seed)
    }

    /// Seed followed by the continuation.
    pub fn text(&self) -> String {
        let all: Vec<&str> = self
            .processed_seed
            .iter()
            .chain(&self.continuation)
            .map(String::as_str)
            .collect();
        detokenize(&all)
    }
}

/// A loaded model ready to serve. Immutable once built.
#[derive(Clone, Debug)]
pub struct EngineState {
    vocab: Vocabulary,
    net: NetworkParams,
    cfg: NetworkConfig,
    classics: Vec<Classic>,
    markov: Option<MarkovModel>,
}

impl EngineState {
    /// Weights are rounded to single precision so that a saved and reloaded
    /// model predicts bit-identically.
    pub fn new(vocab: Vocabulary, mut net: NetworkParams, cfg: NetworkConfig, classics: Vec<Classic>) -> Result<Self> {
        net.validate()?;
        if net.vocab_size() != vocab.len() {
            return Err(Error::DimensionMismatch {
                what: "network vocabulary",
                expected: vocab.len(),
                actual: net.vocab_size(),
            });
        }
        if net.hidden_size() != cfg.hidden_size || net.embedding_dim() != cfg.embedding_dim {
            return Err(Error::InvalidConfig("network sizes disagree with config".into()));
        }
        cfg.validate()?;
        if classics.is_empty() {
            return Err(Error::InvalidArgument("classics catalog is empty".into()));
        }
        net.round_to_f32();
        Ok(EngineState {
            vocab,
            net,
            cfg,
            classics,
            markov: None,
        })
    }

    pub fn with_markov(mut self, markov: MarkovModel) -> Self {
        self.markov = Some(markov);
        self
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn network(&self) -> &NetworkParams {
        &self.net
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn markov(&self) -> Option<&MarkovModel> {
        self.markov.as_ref()
    }

    pub fn list_classics(&self) -> &[Classic] {
        &self.classics
    }

    /// Returns the word unchanged when known, else its nearest vocabulary word
    /// with the replaced flag set.
    pub fn substitute(&self, word: &str) -> (String, bool) {
        if self.vocab.contains(word) {
            (word.to_owned(), false)
        } else {
            (nearest_word(word, &self.vocab).to_owned(), true)
        }
    }

    /// Top-`k` next words for the text typed so far. Unknown words are
    /// substituted first; punctuation and the sentinel are not suggested.
    pub fn suggest(&self, text: &str, k: usize) -> Result<SuggestResponse> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut substitutions = Vec::new();
        let ids: Vec<WordId> = tokenize(text)
            .into_iter()
            .map(|tok| {
                let (word, replaced) = self.substitute(tok.text());
                if replaced {
                    substitutions.push(Substitution {
                        from: tok.into_text(),
                        to: word.clone(),
                    });
                }
                self.vocab.id(&word).expect("substitution yields a vocabulary word")
            })
            .collect();
        let context = context_window(&ids, self.cfg.context_length, self.vocab.unknown_id());
        let probs = predict_probs(&self.net, &context)?;
        let filter = CandidateFilter::words_only(&self.vocab);
        let suggestions = top_k_from_probs(&probs, k, &filter)
            .into_iter()
            .map(|(id, probability)| Suggestion {
                word: self.word(id).to_owned(),
                probability,
            })
            .collect();
        Ok(SuggestResponse {
            substitutions,
            suggestions,
        })
    }

    /// Greedy continuation of `seed_text` by exactly `n` tokens.
    pub fn generate(&self, seed_text: &str, n: usize, opts: GenerateOptions) -> Result<Generated> {
        if n == 0 {
            return Err(Error::InvalidArgument("number of words must be at least 1".into()));
        }
        let processed_seed: Vec<String> = tokenize(seed_text)
            .into_iter()
            .filter_map(|tok| {
                if self.vocab.contains(tok.text()) {
                    Some(tok.into_text())
                } else if opts.substitute {
                    Some(self.substitute(tok.text()).0)
                } else {
                    None
                }
            })
            .collect();
        if processed_seed.is_empty() && !opts.substitute {
            return Err(Error::SeedOutOfVocabulary);
        }
        let seed_ids: Vec<WordId> = processed_seed
            .iter()
            .map(|w| self.vocab.id(w).expect("processed seed is in vocabulary"))
            .collect();
        let ids = generate_ids(
            &self.net,
            &seed_ids,
            n,
            self.cfg.context_length,
            &CandidateFilter::known_only(&self.vocab),
            self.vocab.unknown_id(),
            opts.loop_guard,
        )?;
        let continuation = ids.into_iter().map(|id| self.word(id).to_owned()).collect();
        Ok(Generated {
            processed_seed,
            continuation,
        })
    }

    fn word(&self, id: WordId) -> &str {
        self.vocab.word(id).expect("network output ids are in vocabulary")
    }
}

/// Last `length` ids, left-padded with the sentinel.
pub fn context_window(ids: &[WordId], length: usize, unknown_id: WordId) -> Vec<WordId> {
    let take = ids.len().min(length);
    let mut ctx = vec![unknown_id; length - take];
    ctx.extend_from_slice(&ids[ids.len() - take..]);
    ctx
}

/// Appends `n` argmax predictions to `seed`, sliding the context window.
/// With `loop_guard`, a context seen more than [`LOOP_GUARD_REPEATS`] times
/// yields its second-ranked word once and its count resets.
pub fn generate_ids(
    params: &NetworkParams,
    seed: &[WordId],
    n: usize,
    context_length: usize,
    filter: &CandidateFilter,
    unknown_id: WordId,
    loop_guard: bool,
) -> Result<Vec<WordId>> {
    let mut history = seed.to_vec();
    let mut seen: HashMap<Vec<WordId>, usize> = HashMap::new();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let ctx = context_window(&history, context_length, unknown_id);
        let probs = predict_probs(params, &ctx)?;
        let ranked = top_k_from_probs(&probs, 2, filter);
        let mut next = ranked[0].0;
        if loop_guard {
            let count = seen.entry(ctx).or_insert(0);
            *count += 1;
            if *count > LOOP_GUARD_REPEATS && ranked.len() > 1 {
                next = ranked[1].0;
                *count = 0;
            }
        }
        history.push(next);
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_catalog() {
        let c = default_classics();
        assert!(c.iter().any(|c| c.title == "Moby-Dick" && c.line.starts_with("Call me Ishmael")));
        let mut titles: Vec<&str> = c.iter().map(|c| c.title.as_str()).collect();
        titles.sort();
        titles.dedup();
        assert_eq!(titles.len(), c.len());
        assert_eq!(default_classics(), c);
    }

    #[test]
    fn catalog_parse_errors() {
        assert!(parse_classics("").is_err());
        assert!(parse_classics("no tab here").is_err());
        assert!(parse_classics("A\tx\nA\ty").is_err());
        assert!(parse_classics("A\t \n").is_err());
        assert_eq!(parse_classics("\nA\tx\n\n").unwrap().len(), 1);
    }

    #[test]
    fn context_window_pads_left() {
        assert_eq!(context_window(&[4, 5], 4, 9), [9, 9, 4, 5]);
        assert_eq!(context_window(&[1, 2, 3, 4, 5], 3, 9), [3, 4, 5]);
        assert_eq!(context_window(&[], 2, 9), [9, 9]);
    }

    #[test]
    fn generated_text_joins_seed_and_continuation() {
        let g = Generated {
            processed_seed: vec!["call".into(), "me".into()],
            continuation: vec!["ishmael".into(), ".".into()],
        };
        assert_eq!(g.text(), "call me ishmael.");
        assert_eq!(g.processed_seed_text(), "call me");
    }
}
