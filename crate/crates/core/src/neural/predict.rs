use std::cmp::Ordering;

use super::network::{predict_probs, NetworkParams};
use crate::corpus::{Vocabulary, WordId};
use crate::error::{Error, Result};

/// Ids to hold back from a ranking unless there are not enough others.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidateFilter {
    excluded: Vec<bool>,
}

impl CandidateFilter {
    pub fn none() -> Self {
        CandidateFilter::default()
    }

    /// Excludes punctuation and the unknown sentinel.
    pub fn words_only(vocab: &Vocabulary) -> Self {
        let unk = vocab.unknown_id();
        CandidateFilter {
            excluded: (0..vocab.len() as WordId).map(|id| id == unk || vocab.is_punct(id)).collect(),
        }
    }

    /// Excludes only the unknown sentinel.
    pub fn known_only(vocab: &Vocabulary) -> Self {
        let mut excluded = vec![false; vocab.len()];
        excluded[vocab.unknown_id() as usize] = true;
        CandidateFilter { excluded }
    }

    pub fn excludes(&self, id: WordId) -> bool {
        self.excluded.get(id as usize).copied().unwrap_or(false)
    }
}

/// Index of the largest probability; ties go to the lower id.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

fn rank(probs: &[f64]) -> Vec<WordId> {
    let mut ids: Vec<WordId> = (0..probs.len() as WordId).collect();
    ids.sort_by(|&a, &b| {
        probs[b as usize]
            .partial_cmp(&probs[a as usize])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    ids
}

pub(crate) fn top_k_from_probs(probs: &[f64], k: usize, filter: &CandidateFilter) -> Vec<(WordId, f64)> {
    let ranked = rank(probs);
    let mut chosen: Vec<WordId> = ranked.iter().copied().filter(|&id| !filter.excludes(id)).take(k).collect();
    if chosen.len() < k {
        let missing = k - chosen.len();
        chosen.extend(ranked.iter().copied().filter(|&id| filter.excludes(id)).take(missing));
        // Restore global rank order after topping up.
        let position: Vec<usize> = {
            let mut pos = vec![0; probs.len()];
            for (r, &id) in ranked.iter().enumerate() {
                pos[id as usize] = r;
            }
            pos
        };
        chosen.sort_by_key(|&id| position[id as usize]);
    }
    chosen.into_iter().map(|id| (id, probs[id as usize])).collect()
}

/// The `k` most probable next words under eval-mode inference, descending,
/// ties broken by lower id.
pub fn predict_topk(
    params: &NetworkParams,
    context: &[WordId],
    k: usize,
    filter: &CandidateFilter,
) -> Result<Vec<(WordId, f64)>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let probs = predict_probs(params, context)?;
    Ok(top_k_from_probs(&probs, k, filter))
}
