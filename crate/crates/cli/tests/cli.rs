use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn quill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quill")).args(args).output().unwrap()
}

fn corpus() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/demo_corpus.txt")
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn train_tiny(dir: &Path) -> String {
    let model = dir.join("m.dtng").display().to_string();
    let o = quill(&[
        "train", "--corpus", &corpus(), "--out", &model, "--hidden", "8", "--embed-dim", "10", "--epochs", "2",
        "--glove-epochs", "3", "--lr", "0.01", "--markov-order", "2", "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    model
}

#[test]
fn train_suggest_generate_eval() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_tiny(dir.path());

    let o = quill(&["suggest", "--model", &model, "--text", "call me ishmaal", "--k", "3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("substituted ishmaal -> ishmael"), "{out}");
    assert_eq!(out.lines().filter(|l| l.contains('\t')).count(), 3);

    let o = quill(&["generate", "--model", &model, "--seed-text", "Call me Ishmael.", "--words", "12"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("call me ishmael."));
    assert_eq!(quill_core::tokenize(&text).len(), 4 + 12);

    let csv = dir.path().join("ngram.csv");
    let o = quill(&[
        "eval", "ngram", "--model", &model, "--corpus", &corpus(), "--n", "1..3", "--sample-words", "50", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().next(), Some("n,matched,total,ratio"));
    assert_eq!(rows.lines().count(), 4);

    let csv = dir.path().join("robust.csv");
    let o = quill(&[
        "eval", "robustness", "--model", &model, "--corpus", &corpus(), "--fractions", "0,0.5,1", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);

    let vocab = dir.path().join("vocab.txt");
    let o = quill(&["export", "--model", &model, "--vocab", vocab.to_str().unwrap()]);
    assert!(o.status.success());
    let words = std::fs::read_to_string(&vocab).unwrap();
    assert_eq!(words.lines().next(), Some("call"));
    assert_eq!(words.lines().last(), Some("<unk>"));
}

#[test]
fn markov_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("mk.dtng").display().to_string();
    let o = quill(&["markov-train", "--corpus", &corpus(), "--order", "3", "--out", &model]);
    assert!(o.status.success());
    let gen = |seed: &str| stdout(&quill(&["markov-generate", "--model", &model, "--seed-text", "call me", "--words", "20", "--seed", seed]));
    assert_eq!(gen("4"), gen("4"));
    let o = quill(&["eval", "ngram", "--model", &model, "--corpus", &corpus(), "--n", "2", "--sample-words", "100"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failures_exit_non_zero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.dtng").display().to_string();
    let o = quill(&["suggest", "--model", &missing, "--text", "hi"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));

    let junk = dir.path().join("junk.dtng");
    std::fs::write(&junk, b"not a model").unwrap();
    let o = quill(&["generate", "--model", junk.to_str().unwrap(), "--seed-text", "a", "--words", "3"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("magic"));

    let o = quill(&["eval", "ngram", "--model", &missing, "--corpus", &corpus(), "--n", "0..2"]);
    assert!(!o.status.success());

    let model = train_tiny(dir.path());
    let o = quill(&["generate", "--model", &model, "--seed-text", "zzzz qqqq", "--words", "3"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("out of vocabulary"));
    let o = quill(&["generate", "--model", &model, "--seed-text", "zzzz qqqq", "--words", "3", "--substitute"]);
    assert!(o.status.success());
}

#[test]
fn range_parsing() {
    use quill_cli::parse_range;
    assert_eq!(parse_range("1..8").unwrap(), 1..=8);
    assert_eq!(parse_range("1..=8").unwrap(), 1..=8);
    assert_eq!(parse_range("3").unwrap(), 3..=3);
    assert!(parse_range("0..2").is_err());
    assert!(parse_range("5..2").is_err());
    assert!(parse_range("x").is_err());
}
