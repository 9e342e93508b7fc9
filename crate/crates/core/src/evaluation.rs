//! Quantitative experiments: n-gram similarity of generated text to the
//! corpus, missing-word robustness, and configuration sweeps.
//!
//! Similarity counts generated n-grams with multiplicity against the set of
//! reference n-grams.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::corpus::{windows_from_ids, TrainingWindow, WordId};
use crate::engine::generate_ids;
use crate::error::{Error, Result};
use crate::glove::EmbeddingMatrix;
use crate::neural::{argmax, predict_probs, predict_topk, train, CandidateFilter, NetworkConfig, NetworkParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SimilarityReport {
    pub n: usize,
    pub matched: usize,
    pub total: usize,
}

impl SimilarityReport {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }
}

pub fn ngram_similarity(generated: &[WordId], reference: &[WordId], n: usize) -> Result<SimilarityReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("n-gram size must be at least 1".into()));
    }
    if generated.len() < n || reference.len() < n {
        return Err(Error::InvalidArgument(format!("texts must hold at least {n} tokens")));
    }
    let known: HashSet<&[WordId]> = reference.windows(n).collect();
    let total = generated.len() - n + 1;
    let matched = generated.windows(n).filter(|g| known.contains(g)).count();
    Ok(SimilarityReport { n, matched, total })
}

/// Top-1 next-word accuracy, eval mode, no candidate filtering.
pub fn next_word_accuracy(params: &NetworkParams, windows: &[TrainingWindow]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument("no windows".into()));
    }
    let mut hits = 0usize;
    for w in windows {
        let top = predict_topk(params, &w.context, 1, &CandidateFilter::none())?;
        if top[0].0 == w.target {
            hits += 1;
        }
    }
    Ok(hits as f64 / windows.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub fractions: Vec<f64>,
    pub accuracies: Vec<f64>,
}

/// For each fraction `f`, replaces `round(f · positions)` randomly chosen
/// context positions (across all windows) with `missing_id` and measures
/// top-1 accuracy.
pub fn robustness_curve<R: Rng + ?Sized>(
    params: &NetworkParams,
    windows: &[TrainingWindow],
    fractions: &[f64],
    missing_id: WordId,
    rng: &mut R,
) -> Result<RobustnessReport> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument("no windows".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!("fraction {f} not in [0, 1]")));
    }
    let width = windows[0].context.len();
    if windows.iter().any(|w| w.context.len() != width) {
        return Err(Error::InvalidArgument("windows differ in context length".into()));
    }
    let positions = windows.len() * width;
    let mut accuracies = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let masked = (f * positions as f64).round() as usize;
        let mut contexts: Vec<Vec<WordId>> = windows.iter().map(|w| w.context.clone()).collect();
        for p in index::sample(rng, positions, masked.min(positions)) {
            contexts[p / width][p % width] = missing_id;
        }
        let mut hits = 0usize;
        for (ctx, w) in contexts.iter().zip(windows) {
            if argmax(&predict_probs(params, ctx)?) == w.target as usize {
                hits += 1;
            }
        }
        accuracies.push(hits as f64 / windows.len() as f64);
    }
    Ok(RobustnessReport {
        fractions: fractions.to_vec(),
        accuracies,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    /// Length of the greedy sample compared against the corpus.
    pub sample_words: usize,
    /// Similarity is reported for n-gram sizes `1..=max_n`.
    pub max_n: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            sample_words: 5_000,
            max_n: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub config: NetworkConfig,
    pub final_accuracy: Option<f64>,
    pub final_loss: Option<f64>,
    pub similarity: Vec<SimilarityReport>,
    pub error: Option<String>,
}

/// Trains one model per configuration on `corpus_ids`, generates a greedy
/// sample seeded with the corpus's first `L` ids and scores it against the
/// corpus. A failing configuration yields a row carrying its error.
pub fn sweep(
    configs: &[NetworkConfig],
    corpus_ids: &[WordId],
    embedding: &EmbeddingMatrix,
    filter: &CandidateFilter,
    unknown_id: WordId,
    opts: &SweepOptions,
) -> Vec<SweepRow> {
    configs
        .iter()
        .map(|cfg| match sweep_one(cfg, corpus_ids, embedding, filter, unknown_id, opts) {
            Ok(row) => row,
            Err(e) => SweepRow {
                config: cfg.clone(),
                final_accuracy: None,
                final_loss: None,
                similarity: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect()
}

fn sweep_one(
    cfg: &NetworkConfig,
    corpus_ids: &[WordId],
    embedding: &EmbeddingMatrix,
    filter: &CandidateFilter,
    unknown_id: WordId,
    opts: &SweepOptions,
) -> Result<SweepRow> {
    let windows = windows_from_ids(corpus_ids, cfg.context_length)?;
    let (params, history) = train(&windows, embedding, cfg)?;
    let last = history.last();
    let seed = &corpus_ids[..cfg.context_length];
    let sample = generate_ids(&params, seed, opts.sample_words, cfg.context_length, filter, unknown_id, false)?;
    let similarity = (1..=opts.max_n)
        .map(|n| ngram_similarity(&sample, corpus_ids, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepRow {
        config: cfg.clone(),
        final_accuracy: last.map(|s| s.accuracy),
        final_loss: last.map(|s| s.mean_loss),
        similarity,
        error: None,
    })
}

pub fn write_similarity_csv<W: Write>(reports: &[SimilarityReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "matched", "total", "ratio"])?;
    for r in reports {
        w.write_record([r.n.to_string(), r.matched.to_string(), r.total.to_string(), r.ratio().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_robustness_csv<W: Write>(report: &RobustnessReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fraction", "accuracy"])?;
    for (f, a) in report.fractions.iter().zip(&report.accuracies) {
        w.write_record([f.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], max_n: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "context_length",
        "hidden_size",
        "dropout_rate",
        "learning_rate",
        "epochs",
        "seed",
        "final_accuracy",
        "final_loss",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=max_n).map(|n| format!("matched_{n}")));
    header.extend((1..=max_n).map(|n| format!("ratio_{n}")));
    header.push("error".into());
    w.write_record(&header)?;
    for row in rows {
        let c = &row.config;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut rec = vec![
            c.context_length.to_string(),
            c.hidden_size.to_string(),
            c.dropout_rate.to_string(),
            c.learning_rate.to_string(),
            c.epochs.to_string(),
            c.seed.to_string(),
            opt(row.final_accuracy),
            opt(row.final_loss),
        ];
        for n in 0..max_n {
            rec.push(row.similarity.get(n).map(|s| s.matched.to_string()).unwrap_or_default());
        }
        for n in 0..max_n {
            rec.push(row.similarity.get(n).map(|s| s.ratio().to_string()).unwrap_or_default());
        }
        rec.push(row.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn similarity_table(reports: &[SimilarityReport]) -> String {
    let mut s = format!("{:>3}  {:>9}  {:>9}  {:>7}\n", "n", "matched", "total", "ratio");
    for r in reports {
        let _ = writeln!(s, "{:>3}  {:>9}  {:>9}  {:>7.4}", r.n, r.matched, r.total, r.ratio());
    }
    s
}

pub fn robustness_table(report: &RobustnessReport) -> String {
    let mut s = format!("{:>8}  {:>8}\n", "missing", "accuracy");
    for (f, a) in report.fractions.iter().zip(&report.accuracies) {
        let _ = writeln!(s, "{:>8.2}  {:>8.4}", f, a);
    }
    s
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = format!(
        "{:>3}  {:>6}  {:>7}  {:>8}  {:>8}  {}\n",
        "L", "hidden", "dropout", "accuracy", "loss", "n-gram ratios (n=1..)"
    );
    for row in rows {
        let c = &row.config;
        match &row.error {
            Some(e) => {
                let _ = writeln!(s, "{:>3}  {:>6}  {:>7.2}  error: {e}", c.context_length, c.hidden_size, c.dropout_rate);
            }
            None => {
                let ratios: Vec<String> = row.similarity.iter().map(|r| format!("{:.3}", r.ratio())).collect();
                let _ = writeln!(
                    s,
                    "{:>3}  {:>6}  {:>7.2}  {:>8.4}  {:>8.4}  {}",
                    c.context_length,
                    c.hidden_size,
                    c.dropout_rate,
                    row.final_accuracy.unwrap_or(f64::NAN),
                    row.final_loss.unwrap_or(f64::NAN),
                    ratios.join(" ")
                );
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_similarity_is_total() {
        let x = [3, 1, 4, 1, 5, 9, 2, 6];
        for n in 1..=8 {
            let r = ngram_similarity(&x, &x, n).unwrap();
            assert_eq!(r.matched, r.total);
            assert_eq!(r.ratio(), 1.0);
        }
    }

    #[test]
    fn disjoint_is_zero() {
        let r = ngram_similarity(&[1, 2, 3], &[4, 5, 6], 1).unwrap();
        assert_eq!((r.matched, r.total), (0, 3));
    }

    #[test]
    fn hand_enumerated_bigrams() {
        let (a, b, c, d, e) = (0, 1, 2, 3, 4);
        let r = ngram_similarity(&[a, b, c, d], &[b, c, d, e], 2).unwrap();
        assert_eq!(r, SimilarityReport { n: 2, matched: 2, total: 3 });
        assert!((r.ratio() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn counts_with_multiplicity() {
        let r = ngram_similarity(&[1, 1, 1, 1], &[1, 1], 2).unwrap();
        assert_eq!((r.matched, r.total), (3, 3));
    }

    #[test]
    fn invalid_sizes() {
        assert!(ngram_similarity(&[1, 2], &[1, 2], 0).is_err());
        assert!(ngram_similarity(&[1], &[1, 2], 2).is_err());
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_similarity_csv(&[SimilarityReport { n: 2, matched: 1, total: 4 }], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,matched,total,ratio\n2,1,4,0.25\n");
        let mut buf = Vec::new();
        let rep = RobustnessReport { fractions: vec![0.0, 0.5], accuracies: vec![1.0, 0.5] };
        write_robustness_csv(&rep, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "fraction,accuracy\n0,1\n0.5,0.5\n");
    }
}
