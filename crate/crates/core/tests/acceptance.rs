//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use quill_core::corpus::{detokenize, levenshtein, tokenize, windows_from_ids, Vocabulary, WordId};
use quill_core::engine::{default_classics, EngineState, GenerateOptions};
use quill_core::evaluation::{next_word_accuracy, ngram_similarity, robustness_curve};
use quill_core::glove::{cooccurrence_from_ids, glove_fit, glove_weight, GloveConfig};
use quill_core::markov::markov_train;
use quill_core::model_file::{load_model, save_model};
use quill_core::neural::{
    backward, cross_entropy, dropout, forward_with_masks, predict_probs, softmax, DropoutMasks, NetworkConfig,
    NetworkParams, Phase,
};
use quill_core::pipeline::{train_model, TrainedModel};
use quill_core::{EmbeddingMatrix, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn demo_corpus() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/demo_corpus.txt");
    std::fs::read_to_string(path).expect("demo corpus is shipped")
}

// Full-matrix edit distance, written independently of the library's
// two-row version.
fn oracle_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

fn random_string(rng: &mut ChaCha8Rng, alphabet: &[char], max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

fn gradient_oracle() -> Outcome {
    let (v, d, h, l) = (12, 5, 8, 3);
    let step = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..50 {
        let emb = EmbeddingMatrix::new(Tensor::uniform(&[v, d], 1.0, &mut rng)).unwrap();
        let params = NetworkParams::init(emb, h, &mut rng);
        let context: Vec<WordId> = (0..l).map(|_| rng.gen_range(0..v as WordId)).collect();
        let target = rng.gen_range(0..v as WordId);
        let masks = DropoutMasks::sample(l, h, 0.2, &mut rng);
        let loss = |p: &NetworkParams| {
            let (probs, _) = forward_with_masks(p, &context, masks.clone()).unwrap();
            cross_entropy(&probs, target as usize)
        };
        let (_, cache) = forward_with_masks(&params, &context, masks.clone()).unwrap();
        let grads = backward(&params, &cache, target).unwrap();
        let analytic: Vec<Vec<f64>> = grads.named_tensors().iter().map(|(_, t)| t.data().to_vec()).collect();
        let mut probe = params.clone();
        for (ti, g) in analytic.iter().enumerate() {
            for k in 0..g.len() {
                let orig = probe.weights.tensors_mut()[ti].data()[k];
                probe.weights.tensors_mut()[ti].data_mut()[k] = orig + step;
                let up = loss(&probe);
                probe.weights.tensors_mut()[ti].data_mut()[k] = orig - step;
                let down = loss(&probe);
                probe.weights.tensors_mut()[ti].data_mut()[k] = orig;
                let numeric = (up - down) / (2.0 * step);
                let rel = (g[k] - numeric).abs() / g[k].abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    outcome(worst < 1e-4, format!("{checked} parameters over 50 nets, max relative error {worst:.2e}"))
}

fn overfit_config() -> (GloveConfig, NetworkConfig) {
    let net = NetworkConfig {
        context_length: 6,
        hidden_size: 64,
        embedding_dim: 100,
        dropout_rate: 0.2,
        learning_rate: 1e-3,
        epochs: 300,
        batch_size: 2,
        seed: 0,
    };
    (GloveConfig::default(), net)
}

fn overfit(model: &TrainedModel, elapsed: Duration) -> Outcome {
    let h = &model.history.epochs;
    let first = &h[0];
    let last = h.last().unwrap();
    let reached = h.iter().find(|e| e.accuracy >= 0.95).map(|e| e.epoch);
    let ratio = last.mean_loss / first.mean_loss;
    let train_ratio = last.train_loss / first.train_loss;
    let pass = last.accuracy >= 0.95 && ratio < 0.10 && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "{} tokens, |V|={}: final accuracy {:.4} (>= 0.95 first at epoch {}), loss {:.4} -> {:.4} ({:.1}%; dropout-active running loss {:.1}%), {:.0}s",
            model.corpus.ids.len(),
            model.corpus.vocab.len(),
            last.accuracy,
            reached.map_or("never".into(), |e| e.to_string()),
            first.mean_loss,
            last.mean_loss,
            100.0 * ratio,
            100.0 * train_ratio,
            elapsed.as_secs_f64()
        ),
    )
}

fn markov_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0usize;
    for _ in 0..100 {
        let len = rng.gen_range(10..120);
        let alphabet = rng.gen_range(2..7);
        let ids: Vec<WordId> = (0..len).map(|_| rng.gen_range(0..alphabet)).collect();
        for order in [1usize, 3] {
            let model = markov_train(&ids, order).unwrap();
            let mut counts: HashMap<&[WordId], BTreeMap<WordId, u64>> = HashMap::new();
            for w in ids.windows(order + 1) {
                *counts.entry(&w[..order]).or_default().entry(w[order]).or_insert(0) += 1;
            }
            for (ctx, next) in counts {
                let total: u64 = next.values().sum();
                let expected: Vec<(WordId, f64)> = next.iter().map(|(&id, &c)| (id, c as f64 / total as f64)).collect();
                if model.next(ctx) != expected {
                    return outcome(false, format!("context {ctx:?}: {:?} != {expected:?}", model.next(ctx)));
                }
                compared += 1;
            }
        }
    }
    outcome(true, format!("{compared} contexts over 100 corpora, orders 1 and 3, exact"))
}

fn levenshtein_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let alphabet: Vec<char> = "abcdeé'x".chars().collect();
    for _ in 0..1000 {
        let a = random_string(&mut rng, &alphabet, 12);
        let b = random_string(&mut rng, &alphabet, 12);
        if levenshtein(&a, &b) != oracle_levenshtein(&a, &b) {
            return outcome(false, format!("disagreement on {a:?} / {b:?}"));
        }
    }
    for _ in 0..1000 {
        let a = random_string(&mut rng, &alphabet, 8);
        let b = random_string(&mut rng, &alphabet, 8);
        let c = random_string(&mut rng, &alphabet, 8);
        let (ab, ba, bc, ac) = (levenshtein(&a, &b), levenshtein(&b, &a), levenshtein(&b, &c), levenshtein(&a, &c));
        if ab != ba || (ab == 0) != (a == b) || ac > ab + bc || levenshtein(&a, &a) != 0 {
            return outcome(false, format!("metric violated on {a:?} {b:?} {c:?}"));
        }
    }
    outcome(true, "1000 pairs match the full-matrix oracle; 1000 triples satisfy the metric axioms")
}

fn tokenizer_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let alphabet: Vec<char> = "aBcZé9 '’.,;?!\":-()[]/\t\nÄß".chars().collect();
    let eliminated: Vec<char> = "!\":-()[]/".chars().collect();
    for _ in 0..2000 {
        let text = random_string(&mut rng, &alphabet, 40);
        let toks = tokenize(&text);
        for t in &toks {
            if t.text().chars().any(|c| eliminated.contains(&c) || c.is_whitespace() || c.is_uppercase()) {
                return outcome(false, format!("{text:?} produced token {:?}", t.text()));
            }
        }
        if tokenize(&detokenize(&toks)) != toks {
            return outcome(false, format!("round trip failed for {text:?}"));
        }
    }
    for _ in 0..500 {
        let left = random_string(&mut rng, &['a', 'b', 'Q', '7'], 4);
        let right = random_string(&mut rng, &['a', 'b', 'M', '3'], 4);
        let word = format!("{left}'{right}");
        if word == "'" {
            continue;
        }
        let toks = tokenize(&format!("x {word} y"));
        if toks.len() != 3 || toks[1].text() != word.to_lowercase() {
            return outcome(false, format!("{word:?} split into {toks:?}"));
        }
    }
    let im = tokenize("I'm here.");
    let texts: Vec<&str> = im.iter().map(|t| t.text()).collect();
    outcome(
        texts == ["i'm", "here", "."],
        "2000 fuzzed texts: no eliminated characters, round trip exact; 500 apostrophe words stay single tokens",
    )
}

fn softmax_dropout() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..300);
        let scale = [1.0, 10.0, 100.0, 1000.0][rng.gen_range(0..4)];
        let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let p = softmax(&logits);
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return outcome(false, "probability outside [0, 1]");
        }
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    let x: Vec<f64> = (0..64).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let (eval, mask) = dropout(&x, 0.2, Phase::Eval, &mut rng);
    let identity = eval == x && mask.iter().all(|&m| m == 1.0);
    let ones = vec![1.0; 10];
    let samples = 100_000;
    let mut sum = 0.0;
    for _ in 0..samples {
        let (y, _) = dropout(&ones, 0.2, Phase::Train, &mut rng);
        sum += y.iter().sum::<f64>();
    }
    let mean = sum / (samples * ones.len()) as f64;
    let pass = worst <= 1e-9 && identity && (mean - 1.0).abs() <= 0.02;
    outcome(
        pass,
        format!("max |sum-1| {worst:.1e}; eval identity {identity}; train-mode mean {mean:.4} over 1e5 samples"),
    )
}

fn robustness(model: &TrainedModel) -> Outcome {
    let windows = windows_from_ids(&model.corpus.ids, model.config.context_length).unwrap();
    let standalone = next_word_accuracy(&model.params, &windows).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let fractions = [0.0, 0.2, 0.8];
    let curve = robustness_curve(&model.params, &windows, &fractions, model.corpus.vocab.unknown_id(), &mut rng).unwrap();
    let a = &curve.accuracies;
    outcome(
        a[0] == standalone && a[1] >= a[2],
        format!("f=0 {:.4} (standalone {standalone:.4}), f=0.2 {:.4}, f=0.8 {:.4}", a[0], a[1], a[2]),
    )
}

fn ngram() -> Outcome {
    let x: Vec<WordId> = vec![4, 8, 15, 16, 23, 42, 4, 8];
    let self_ok = (1..=8).all(|n| ngram_similarity(&x, &x, n).unwrap().ratio() == 1.0);
    let (a, b, c, d, e) = (0, 1, 2, 3, 4);
    let r = ngram_similarity(&[a, b, c, d], &[b, c, d, e], 2).unwrap();
    outcome(
        self_ok && r.matched == 2 && r.total == 3 && r.ratio() == 2.0 / 3.0,
        format!("self ratio 1 for n=1..8; [a,b,c,d] vs [b,c,d,e], n=2 -> {}/{}", r.matched, r.total),
    )
}

fn glove_reduction(tokens: &[quill_core::Token], extra: &str) -> (f64, f64, bool, bool) {
    let vocab = Vocabulary::build(tokens).unwrap();
    let mut ids = vocab.encode(tokens).ids;
    // An out-of-vocabulary word encodes as the sentinel.
    ids.extend(vocab.encode(&tokenize(extra)).ids);
    let cfg = GloveConfig::default();
    let cooc = cooccurrence_from_ids(&ids, vocab.len(), Some(vocab.unknown_id()), cfg.window);
    let fit = glove_fit(&cooc, &cfg).unwrap();
    let unk = vocab.unknown_id();
    let sentinel_zero = fit.embedding.row(unk).iter().all(|&v| v == 0.0);
    (fit.initial_objective(), fit.final_objective(), sentinel_zero, ids.contains(&unk))
}

fn glove() -> Outcome {
    let mut toy = String::new();
    while tokenize(&toy).len() < 199 {
        toy.push_str("the cat sat on the mat. the dog sat on the log. ");
    }
    let toy: Vec<_> = tokenize(&toy).into_iter().take(199).collect();
    let (initial, last, sentinel_zero, sentinel_used) = glove_reduction(&toy, "zebra");
    let reduction = 1.0 - last / initial;
    let cfg = GloveConfig::default();
    let weights = glove_weight(cfg.x_max, &cfg) == 1.0 && glove_weight(0.0, &cfg) == 0.0;
    let prose = tokenize(&demo_corpus());
    let (p0, p1, _, _) = glove_reduction(&prose[..199], "zebra");
    outcome(
        reduction >= 0.9 && weights && sentinel_zero && sentinel_used,
        format!(
            "toy corpus objective {initial:.3} -> {last:.3} ({:.1}% reduction; 200-token prose prefix: {:.1}%); f(xMax)=1, f(0)=0: {weights}; sentinel row zero: {sentinel_zero}",
            100.0 * reduction,
            100.0 * (1.0 - p1 / p0)
        ),
    )
}

fn persistence(model: &TrainedModel) -> Outcome {
    let state = EngineState::new(
        model.corpus.vocab.clone(),
        model.params.clone(),
        model.config.clone(),
        default_classics(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.dtng");
    save_model(&path, &state).unwrap();
    let loaded = load_model(&path).unwrap();
    let windows = windows_from_ids(&model.corpus.ids, model.config.context_length).unwrap();
    let mut identical = loaded.network() == state.network() && loaded.vocab() == state.vocab();
    for w in &windows {
        let a = predict_probs(state.network(), &w.context).unwrap();
        let b = predict_probs(loaded.network(), &w.context).unwrap();
        identical &= a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    }
    let text = "call me ishmael. some years ago";
    identical &= state.suggest(text, 5).unwrap() == loaded.suggest(text, 5).unwrap();
    outcome(
        identical,
        format!(
            "{} bytes; probabilities for {} contexts and suggestions bitwise equal after reload",
            std::fs::metadata(&path).unwrap().len(),
            windows.len()
        ),
    )
}

fn determinism(text: &str) -> Outcome {
    let (glove, net) = overfit_config();
    let net = NetworkConfig { epochs: 15, seed: 5, ..net };
    let run = || {
        let m = train_model(text, &glove, &net, |_| {}).unwrap();
        let state = EngineState::new(m.corpus.vocab.clone(), m.params.clone(), net.clone(), default_classics()).unwrap();
        let story = state.generate("Call me Ishmael.", 60, GenerateOptions::default()).unwrap().text();
        (m.history, m.embedding, story)
    };
    let (h1, e1, s1) = run();
    let (h2, e2, s2) = run();
    let bits = |h: &quill_core::TrainingHistory| -> Vec<(u64, u64, u64)> {
        h.epochs
            .iter()
            .map(|e| (e.train_loss.to_bits(), e.mean_loss.to_bits(), e.accuracy.to_bits()))
            .collect()
    };
    outcome(
        bits(&h1) == bits(&h2) && e1 == e2 && s1 == s2,
        format!("15-epoch runs: loss histories, embeddings and a 60-word story identical ({} chars)", s1.len()),
    )
}

/// Overfit-model examples from the prediction and suggestion contracts.
fn overfit_queries(model: &TrainedModel) -> Outcome {
    let state = EngineState::new(
        model.corpus.vocab.clone(),
        model.params.clone(),
        model.config.clone(),
        default_classics(),
    )
    .unwrap();
    let top = state.suggest("the quick brown fox jumps over", 1).unwrap();
    let fox = &top.suggestions[0];
    let toks = tokenize(&demo_corpus());
    let first6 = detokenize(&toks[..6]);
    let seventh = toks[6].text();
    let s = state.suggest(&first6, 1).unwrap();
    outcome(
        fox.word == "the" && fox.probability > 0.9 && s.suggestions[0].word == seventh,
        format!(
            "\"...jumps over\" -> {:?} p={:.3}; {first6:?} -> {:?} (corpus: {seventh:?})",
            fox.word, fox.probability, s.suggestions[0].word
        ),
    )
}

fn main() -> ExitCode {
    let text = demo_corpus();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let run = |name: &'static str, f: &dyn Fn() -> Outcome, results: &mut Vec<(&str, Outcome)>| {
        let t = Instant::now();
        let mut o = f();
        o.detail = format!("{} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    run("gradient oracle", &gradient_oracle, &mut results);
    let t = Instant::now();
    let (glove_cfg, net_cfg) = overfit_config();
    let model = train_model(&text, &glove_cfg, &net_cfg, |_| {}).expect("overfit training");
    let elapsed = t.elapsed();
    run("overfit accuracy and loss", &|| overfit(&model, elapsed), &mut results);
    run("markov oracle", &markov_oracle, &mut results);
    run("levenshtein oracle", &levenshtein_oracle, &mut results);
    run("tokenizer properties", &tokenizer_properties, &mut results);
    run("softmax and dropout numerics", &softmax_dropout, &mut results);
    run("robustness harness", &|| robustness(&model), &mut results);
    run("n-gram similarity", &ngram, &mut results);
    run("glove", &glove, &mut results);
    run("persistence", &|| persistence(&model), &mut results);
    run("determinism", &|| determinism(&text), &mut results);
    run("overfit queries (supplementary)", &|| overfit_queries(&model), &mut results);

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
