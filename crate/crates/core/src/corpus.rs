//! Text preprocessing, vocabulary construction and edit-distance lookup.
//!
//! Tokenization keeps letters, digits and apostrophes as word characters and
//! the four marks `. , ; ?` as standalone tokens. Every other character is
//! removed and acts as a word boundary. All output is lowercase.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense vocabulary index.
pub type WordId = u32;

/// Surface form of the reserved out-of-vocabulary / missing-word entry.
/// The tokenizer can never produce it, so it never collides with a corpus word.
pub const UNKNOWN_TOKEN: &str = "<unk>";

const PUNCTUATION: [char; 4] = ['.', ',', ';', '?'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Punct,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    text: String,
    kind: TokenKind,
}

impl Token {
    /// Classifies an already-normalized token text.
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let kind = if is_punct_text(&text) {
            TokenKind::Punct
        } else {
            TokenKind::Word
        };
        Token { text, kind }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    pub fn is_punct(&self) -> bool {
        self.kind == TokenKind::Punct
    }

    pub fn into_text(self) -> String {
        self.text
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub fn is_punct_text(text: &str) -> bool {
    let mut chars = text.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if PUNCTUATION.contains(&c))
}

fn is_word_char(ch: char) -> bool {
    ch.is_alphanumeric() || ch == '\''
}

fn flush_word(word: &mut String, tokens: &mut Vec<Token>) {
    // A run made only of apostrophes is not a word.
    if word.chars().any(|c| c != '\'') {
        tokens.push(Token {
            text: std::mem::take(word),
            kind: TokenKind::Word,
        });
    }
    word.clear();
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in lower.chars() {
        let ch = match ch {
            '\u{2018}' | '\u{2019}' => '\'',
            other => other,
        };
        if is_word_char(ch) {
            word.push(ch);
            continue;
        }
        flush_word(&mut word, &mut tokens);
        if PUNCTUATION.contains(&ch) {
            tokens.push(Token {
                text: ch.to_string(),
                kind: TokenKind::Punct,
            });
        }
    }
    flush_word(&mut word, &mut tokens);
    tokens
}

/// Joins tokens with single spaces, attaching punctuation to the preceding
/// token. `tokenize(detokenize(ts)) == ts` for any tokenizer output.
pub fn detokenize<T: AsRef<str>>(tokens: &[T]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        if i > 0 && !is_punct_text(tok) {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

/// Reads corpus files and concatenates them in order, newline separated.
pub fn read_corpus<P: AsRef<Path>>(paths: &[P]) -> io::Result<String> {
    let mut text = String::new();
    for (i, path) in paths.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&fs::read_to_string(path)?);
    }
    Ok(text)
}

/// Bijection between token texts and dense ids. Corpus words take ids in
/// order of first appearance; the unknown sentinel always takes the last id.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
    counts: Vec<u64>,
}

impl Vocabulary {
    pub fn build(tokens: &[Token]) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut words: Vec<String> = Vec::new();
        let mut index: HashMap<String, WordId> = HashMap::new();
        let mut counts: Vec<u64> = Vec::new();
        for tok in tokens {
            match index.get(tok.text()) {
                Some(&id) => counts[id as usize] += 1,
                None => {
                    index.insert(tok.text().to_owned(), words.len() as WordId);
                    words.push(tok.text().to_owned());
                    counts.push(1);
                }
            }
        }
        index.insert(UNKNOWN_TOKEN.to_owned(), words.len() as WordId);
        words.push(UNKNOWN_TOKEN.to_owned());
        counts.push(0);
        Ok(Vocabulary {
            words,
            index,
            counts,
        })
    }

    /// Rebuilds a vocabulary from a stored word list (sentinel last) and
    /// per-word corpus counts.
    pub fn from_parts(words: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if words.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                what: "vocabulary counts",
                expected: words.len(),
                actual: counts.len(),
            });
        }
        if words.last().map(String::as_str) != Some(UNKNOWN_TOKEN) {
            return Err(Error::InvalidArgument(
                "vocabulary must end with the unknown sentinel".into(),
            ));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as WordId).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Vocabulary {
            words,
            index,
            counts,
        })
    }

    /// Number of entries including the sentinel.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn unknown_id(&self) -> WordId {
        (self.words.len() - 1) as WordId
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        word != UNKNOWN_TOKEN && self.index.contains_key(word)
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn is_punct(&self, id: WordId) -> bool {
        self.word(id).is_some_and(is_punct_text)
    }

    /// Maps each token to its id; absent tokens map to the sentinel.
    pub fn encode<'v>(&'v self, tokens: &[Token]) -> EncodedCorpus<'v> {
        let unk = self.unknown_id();
        let ids = tokens
            .iter()
            .map(|t| self.index.get(t.text()).copied().unwrap_or(unk))
            .collect();
        EncodedCorpus { ids, vocab: self }
    }

    /// Inverse of [`encode`](Self::encode) for in-vocabulary ids. The sentinel
    /// decodes to the `<unk>` marker.
    pub fn decode(&self, ids: &[WordId]) -> Result<Vec<Token>> {
        ids.iter()
            .map(|&id| {
                self.word(id).map(Token::new).ok_or(Error::IdOutOfRange {
                    id,
                    vocab_size: self.len(),
                })
            })
            .collect()
    }

    /// One word per line; line number is the id.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for w in &self.words {
            writeln!(out, "{w}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EncodedCorpus<'v> {
    pub ids: Vec<WordId>,
    pub vocab: &'v Vocabulary,
}

impl EncodedCorpus<'_> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn decode(&self) -> Result<Vec<Token>> {
        self.vocab.decode(&self.ids)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingWindow {
    pub context: Vec<WordId>,
    pub target: WordId,
}

pub fn make_windows(corpus: &EncodedCorpus<'_>, context_length: usize) -> Result<Vec<TrainingWindow>> {
    windows_from_ids(&corpus.ids, context_length)
}

/// Window `i` has context `ids[i..i + L]` and target `ids[i + L]`.
pub fn windows_from_ids(ids: &[WordId], context_length: usize) -> Result<Vec<TrainingWindow>> {
    if context_length == 0 {
        return Err(Error::InvalidArgument("context length must be at least 1".into()));
    }
    if ids.len() <= context_length {
        return Err(Error::CorpusShorterThanContext {
            len: ids.len(),
            context: context_length,
        });
    }
    Ok(ids
        .windows(context_length + 1)
        .map(|w| TrainingWindow {
            context: w[..context_length].to_vec(),
            target: w[context_length],
        })
        .collect())
}

/// Edit distance over Unicode scalar values (insert, delete, substitute).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Returns `word` if it is in the vocabulary, otherwise the closest word by
/// edit distance. Punctuation and the sentinel are not candidates; ties go
/// to the more frequent word, then to the lexicographically smaller one.
pub fn nearest_word<'v>(word: &str, vocab: &'v Vocabulary) -> &'v str {
    if let Some(id) = vocab.id(word) {
        if id != vocab.unknown_id() {
            return &vocab.words[id as usize];
        }
    }
    let target: Vec<char> = word.chars().collect();
    let unk = vocab.unknown_id();
    let pick = |allow_punct: bool| {
        let mut best: Option<(usize, WordId)> = None;
        let mut buf: Vec<char> = Vec::new();
        for (id, candidate) in vocab.words.iter().enumerate() {
            let id = id as WordId;
            if id == unk || (!allow_punct && is_punct_text(candidate)) {
                continue;
            }
            buf.clear();
            buf.extend(candidate.chars());
            if let Some((best_d, _)) = best {
                // Length difference is a lower bound on the distance.
                if buf.len().abs_diff(target.len()) > best_d {
                    continue;
                }
            }
            let d = levenshtein_chars(&target, &buf);
            let better = match best {
                None => true,
                Some((best_d, best_id)) => {
                    (d, std::cmp::Reverse(vocab.count(id)), candidate.as_str())
                        < (
                            best_d,
                            std::cmp::Reverse(vocab.count(best_id)),
                            vocab.words[best_id as usize].as_str(),
                        )
                }
            };
            if better {
                best = Some((d, id));
            }
        }
        best.map(|(_, id)| id)
    };
    let id = pick(false).or_else(|| pick(true)).unwrap_or(unk);
    &vocab.words[id as usize]
}
