//! Order-k word Markov chain, the comparison baseline.
//!
//! Counts are kept for every order `0..=k` so that an unseen context backs
//! off to the longest seen suffix, ending at the unigram distribution.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::corpus::WordId;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transitions {
    counts: BTreeMap<WordId, u64>,
    total: u64,
}

impl Transitions {
    pub fn add(&mut self, next: WordId, count: u64) {
        *self.counts.entry(next).or_insert(0) += count;
        self.total += count;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<WordId, u64> {
        &self.counts
    }

    pub fn distribution(&self) -> Vec<(WordId, f64)> {
        let total = self.total as f64;
        self.counts.iter().map(|(&id, &c)| (id, c as f64 / total)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovModel {
    order: usize,
    /// `tables[n]` maps length-`n` contexts to their successors.
    tables: Vec<HashMap<Vec<WordId>, Transitions>>,
}

pub fn markov_train(ids: &[WordId], order: usize) -> Result<MarkovModel> {
    if ids.len() <= order {
        return Err(Error::CorpusShorterThanContext {
            len: ids.len(),
            context: order,
        });
    }
    let mut tables = vec![HashMap::new(); order + 1];
    for (n, table) in tables.iter_mut().enumerate() {
        for w in ids.windows(n + 1) {
            table
                .entry(w[..n].to_vec())
                .or_insert_with(Transitions::default)
                .add(w[n], 1);
        }
    }
    Ok(MarkovModel { order, tables })
}

impl MarkovModel {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Contexts of length `n` with their successor counts.
    pub fn table(&self, n: usize) -> Option<&HashMap<Vec<WordId>, Transitions>> {
        self.tables.get(n)
    }

    /// Reassembles a model from per-order `(context, next, count)` rows.
    pub fn from_rows(order: usize, rows: Vec<Vec<(Vec<WordId>, WordId, u64)>>) -> Result<Self> {
        if rows.len() != order + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} Markov tables, got {}",
                order + 1,
                rows.len()
            )));
        }
        let mut tables = vec![HashMap::new(); order + 1];
        for (n, table_rows) in rows.into_iter().enumerate() {
            for (ctx, next, count) in table_rows {
                if ctx.len() != n || count == 0 {
                    return Err(Error::InvalidArgument("malformed Markov row".into()));
                }
                tables[n].entry(ctx).or_insert_with(Transitions::default).add(next, count);
            }
        }
        if tables[0].is_empty() {
            return Err(Error::InvalidArgument("Markov model has no unigram table".into()));
        }
        Ok(MarkovModel { order, tables })
    }

    /// Rows per order, sorted for reproducible serialization.
    pub fn to_rows(&self) -> Vec<Vec<(Vec<WordId>, WordId, u64)>> {
        self.tables
            .iter()
            .map(|table| {
                let mut rows: Vec<_> = table
                    .iter()
                    .flat_map(|(ctx, t)| t.counts.iter().map(move |(&next, &c)| (ctx.clone(), next, c)))
                    .collect();
                rows.sort();
                rows
            })
            .collect()
    }

    /// Next-word distribution from the last `k` ids of `context`, backing off
    /// to shorter suffixes when a context was never seen. Sorted by id.
    pub fn next(&self, context: &[WordId]) -> Vec<(WordId, f64)> {
        self.backoff(context).distribution()
    }

    fn backoff(&self, context: &[WordId]) -> &Transitions {
        let longest = self.order.min(context.len());
        for n in (0..=longest).rev() {
            let suffix = &context[context.len() - n..];
            if let Some(t) = self.tables[n].get(suffix) {
                return t;
            }
        }
        unreachable!("unigram table always has the empty context")
    }

    /// Samples `n` continuation ids after `seed`.
    pub fn generate<R: Rng + ?Sized>(&self, seed: &[WordId], n: usize, rng: &mut R) -> Vec<WordId> {
        let mut history = seed.to_vec();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let t = self.backoff(&history);
            let mut pick = rng.gen_range(0..t.total);
            let mut next = *t.counts.keys().next().expect("stored contexts have successors");
            for (&id, &c) in &t.counts {
                if pick < c {
                    next = id;
                    break;
                }
                pick -= c;
            }
            history.push(next);
            out.push(next);
        }
        out
    }
}

pub fn markov_next(model: &MarkovModel, context: &[WordId]) -> Vec<(WordId, f64)> {
    model.next(context)
}

pub fn markov_generate<R: Rng + ?Sized>(model: &MarkovModel, seed: &[WordId], n: usize, rng: &mut R) -> Vec<WordId> {
    model.generate(seed, n, rng)
}
