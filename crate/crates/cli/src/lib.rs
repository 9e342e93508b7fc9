//! The `quill` command line: training, querying, evaluation and serving.

pub mod server;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use quill_core::corpus::{detokenize, read_corpus, windows_from_ids, WordId};
use quill_core::engine::{default_classics, generate_ids, load_classics, EngineState, GenerateOptions};
use quill_core::evaluation::{
    ngram_similarity, robustness_curve, robustness_table, similarity_table, sweep, sweep_table, write_robustness_csv,
    write_similarity_csv, write_sweep_csv, SweepOptions,
};
use quill_core::glove::GloveConfig;
use quill_core::markov::markov_train;
use quill_core::model_file::{load_markov, load_model, peek_kind, save_markov, save_model, MarkovFile, ModelKind};
use quill_core::neural::{CandidateFilter, NetworkConfig};
use quill_core::pipeline::{prepare_corpus, train_model};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Parser)]
#[command(name = "quill", version, about = "Corpus-conditioned predictive writing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the embedding and train the LSTM predictor on a corpus.
    Train(TrainArgs),
    /// Suggest the next word for a partial text.
    Suggest(SuggestArgs),
    /// Continue a seed line greedily.
    Generate(GenerateArgs),
    /// Count an order-k Markov chain over a corpus.
    MarkovTrain(MarkovTrainArgs),
    /// Sample from a Markov model file.
    MarkovGenerate(MarkovGenerateArgs),
    /// Run an evaluation experiment.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Write a model's vocabulary and embedding as text.
    Export(ExportArgs),
    /// Serve the JSON API (and optionally a static UI bundle).
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 6)]
    pub context: usize,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub glove_epochs: usize,
    /// Tab-separated `title<TAB>opening line` catalog; defaults to the bundled one.
    #[arg(long)]
    pub classics: Option<PathBuf>,
    /// Also store an order-k Markov baseline in the model file.
    #[arg(long)]
    pub markov_order: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SuggestArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub text: String,
    #[arg(long, default_value_t = server::DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub seed_text: String,
    #[arg(long)]
    pub words: usize,
    /// Replace unknown seed words with their nearest vocabulary word.
    #[arg(long)]
    pub substitute: bool,
    /// Plain argmax decoding without the repetition guard.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct MarkovTrainArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MarkovGenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub seed_text: String,
    #[arg(long)]
    pub words: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// n-gram overlap between a generated sample and the corpus.
    Ngram(NgramArgs),
    /// Accuracy as a growing fraction of context words goes missing.
    Robustness(RobustnessArgs),
    /// Train one model per configuration and compare n-gram overlap.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct NgramArgs {
    /// A network or Markov model file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub corpus: Vec<PathBuf>,
    /// A single size or an inclusive range such as `1..8`.
    #[arg(long, default_value = "1..8", value_parser = parse_range)]
    pub n: RangeInclusive<usize>,
    #[arg(long, default_value_t = 5_000)]
    pub sample_words: usize,
    /// Sampling seed for Markov models.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "6")]
    pub contexts: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub hidden: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub dropouts: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 50)]
    pub glove_epochs: usize,
    #[arg(long, default_value_t = 5_000)]
    pub sample_words: usize,
    #[arg(long, default_value_t = 8)]
    pub max_n: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub embedding: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Directory of a built UI bundle served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

pub fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (lo, hi.strip_prefix('=').unwrap_or(hi)),
        None => (s, s),
    };
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("range {s:?} must satisfy 1 <= start <= end"));
    }
    Ok(lo..=hi)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Suggest(a) => suggest(a),
        Command::Generate(a) => generate(a),
        Command::MarkovTrain(a) => markov_train_cmd(a),
        Command::MarkovGenerate(a) => markov_generate(a),
        Command::Eval(EvalCommand::Ngram(a)) => eval_ngram(a),
        Command::Eval(EvalCommand::Robustness(a)) => eval_robustness(a),
        Command::Eval(EvalCommand::Sweep(a)) => eval_sweep(a),
        Command::Export(a) => export(a),
        Command::Serve(a) => serve(a),
    }
}

fn corpus_text(paths: &[PathBuf]) -> Result<String> {
    read_corpus(paths).with_context(|| format!("reading corpus {paths:?}"))
}

fn load_engine(path: &Path) -> Result<EngineState> {
    load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn train(a: TrainArgs) -> Result<()> {
    let text = corpus_text(&a.corpus)?;
    let classics = match &a.classics {
        Some(p) => load_classics(p).with_context(|| format!("reading classics {}", p.display()))?,
        None => default_classics(),
    };
    let cfg = NetworkConfig {
        context_length: a.context,
        hidden_size: a.hidden,
        embedding_dim: a.embed_dim,
        dropout_rate: a.dropout,
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let glove = GloveConfig {
        dim: a.embed_dim,
        epochs: a.glove_epochs,
        seed: a.seed,
        ..GloveConfig::default()
    };
    let quiet = a.quiet;
    let model = train_model(&text, &glove, &cfg, |s| {
        if !quiet {
            eprintln!(
                "epoch {:>4}/{}  loss {:.4}  train loss {:.4}  accuracy {:.4}",
                s.epoch, cfg.epochs, s.mean_loss, s.train_loss, s.accuracy
            );
        }
    })?;
    let mut state = EngineState::new(model.corpus.vocab.clone(), model.params, cfg, classics)?;
    if let Some(order) = a.markov_order {
        state = state.with_markov(markov_train(&model.corpus.ids, order)?);
    }
    save_model(&a.out, &state).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "saved {} ({} tokens, vocabulary {}, {} parameters)",
        a.out.display(),
        model.corpus.ids.len(),
        state.vocab().len(),
        state.network().weights.param_count()
    );
    Ok(())
}

fn suggest(a: SuggestArgs) -> Result<()> {
    if a.k == 0 {
        bail!("--k must be at least 1");
    }
    let engine = load_engine(&a.model)?;
    let r = engine.suggest(&a.text, a.k)?;
    let mut out = io::stdout().lock();
    for s in &r.substitutions {
        writeln!(out, "substituted {} -> {}", s.from, s.to)?;
    }
    for s in &r.suggestions {
        writeln!(out, "{}\t{:.6}", s.word, s.probability)?;
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let engine = load_engine(&a.model)?;
    let opts = GenerateOptions {
        substitute: a.substitute,
        loop_guard: !a.raw,
    };
    let g = engine.generate(&a.seed_text, a.words, opts)?;
    println!("{}", g.text());
    Ok(())
}

fn markov_train_cmd(a: MarkovTrainArgs) -> Result<()> {
    let corpus = prepare_corpus(&corpus_text(&a.corpus)?)?;
    let model = markov_train(&corpus.ids, a.order)?;
    let contexts = model.table(a.order).map_or(0, |t| t.len());
    save_markov(
        &a.out,
        &MarkovFile {
            vocab: corpus.vocab,
            model,
            seed: 0,
        },
    )
    .with_context(|| format!("writing {}", a.out.display()))?;
    println!("saved {} (order {}, {contexts} contexts)", a.out.display(), a.order);
    Ok(())
}

fn markov_generate(a: MarkovGenerateArgs) -> Result<()> {
    let file = load_markov(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let seed = file.vocab.encode(&quill_core::tokenize(&a.seed_text)).ids;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let ids = file.model.generate(&seed, a.words, &mut rng);
    let words: Vec<&str> = seed
        .iter()
        .chain(&ids)
        .map(|&id| file.vocab.word(id).expect("ids come from this vocabulary"))
        .collect();
    println!("{}", detokenize(&words));
    Ok(())
}

/// A generated sample and the corpus, both in the model's id space.
fn ngram_sample(a: &NgramArgs, text: &str) -> Result<(Vec<WordId>, Vec<WordId>)> {
    let bytes = std::fs::read(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let tokens = quill_core::tokenize(text);
    match peek_kind(&bytes)? {
        ModelKind::Network => {
            let engine = quill_core::model_file::decode_model(&bytes)?;
            let ids = engine.vocab().encode(&tokens).ids;
            let l = engine.config().context_length;
            if ids.len() < l {
                bail!("corpus has fewer than {l} tokens");
            }
            let vocab = engine.vocab();
            let sample = generate_ids(
                engine.network(),
                &ids[..l],
                a.sample_words,
                l,
                &CandidateFilter::known_only(vocab),
                vocab.unknown_id(),
                false,
            )?;
            Ok((sample, ids))
        }
        ModelKind::Markov => {
            let file = quill_core::model_file::decode_markov(&bytes)?;
            let ids = file.vocab.encode(&tokens).ids;
            let k = file.model.order().min(ids.len());
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            Ok((file.model.generate(&ids[..k], a.sample_words, &mut rng), ids))
        }
    }
}

fn eval_ngram(a: NgramArgs) -> Result<()> {
    let text = corpus_text(&a.corpus)?;
    let (sample, reference) = ngram_sample(&a, &text)?;
    let reports = a
        .n
        .clone()
        .map(|n| ngram_similarity(&sample, &reference, n))
        .collect::<quill_core::Result<Vec<_>>>()?;
    print!("{}", similarity_table(&reports));
    if let Some(path) = &a.csv {
        write_similarity_csv(&reports, create(path)?)?;
    }
    Ok(())
}

fn eval_robustness(a: RobustnessArgs) -> Result<()> {
    let engine = load_engine(&a.model)?;
    let text = corpus_text(&a.corpus)?;
    let ids = engine.vocab().encode(&quill_core::tokenize(&text)).ids;
    let windows = windows_from_ids(&ids, engine.config().context_length)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let report = robustness_curve(engine.network(), &windows, &a.fractions, engine.vocab().unknown_id(), &mut rng)?;
    print!("{}", robustness_table(&report));
    if let Some(path) = &a.csv {
        write_robustness_csv(&report, create(path)?)?;
    }
    Ok(())
}

fn eval_sweep(a: SweepArgs) -> Result<()> {
    let corpus = prepare_corpus(&corpus_text(&a.corpus)?)?;
    let glove = GloveConfig {
        dim: a.embed_dim,
        epochs: a.glove_epochs,
        seed: a.seed,
        ..GloveConfig::default()
    };
    let embedding = corpus.embedding(&glove)?;
    let mut configs = Vec::new();
    for &context_length in &a.contexts {
        for &hidden_size in &a.hidden {
            for &dropout_rate in &a.dropouts {
                configs.push(NetworkConfig {
                    context_length,
                    hidden_size,
                    embedding_dim: a.embed_dim,
                    dropout_rate,
                    learning_rate: a.lr,
                    epochs: a.epochs,
                    batch_size: a.batch_size,
                    seed: a.seed,
                });
            }
        }
    }
    let opts = SweepOptions {
        sample_words: a.sample_words,
        max_n: a.max_n,
    };
    let rows = sweep(
        &configs,
        &corpus.ids,
        &embedding,
        &CandidateFilter::known_only(&corpus.vocab),
        corpus.vocab.unknown_id(),
        &opts,
    );
    print!("{}", sweep_table(&rows));
    if let Some(path) = &a.csv {
        write_sweep_csv(&rows, a.max_n, create(path)?)?;
    }
    if rows.iter().all(|r| r.error.is_some()) {
        bail!("every configuration failed");
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    if a.vocab.is_none() && a.embedding.is_none() {
        bail!("nothing to export: pass --vocab and/or --embedding");
    }
    let engine = load_engine(&a.model)?;
    if let Some(path) = &a.vocab {
        let mut w = create(path)?;
        engine.vocab().write_text(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = &a.embedding {
        let mut w = create(path)?;
        engine.network().embedding.write_text(engine.vocab(), &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let engine = Arc::new(load_engine(&a.model)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(server::serve(engine, a.addr, a.static_dir))
}
