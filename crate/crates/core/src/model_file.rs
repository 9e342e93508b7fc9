//! Single-file model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "DTNG" | version u32 | meta_len u32 | metadata JSON
//! block_count u32
//! per block: name_len u16 | name | dtype u8 | ndim u8 | dims u32 × ndim | payload
//! ```
//!
//! `dtype` 0 is f32, 1 is u32. Network files carry `embedding`, the LSTM
//! tensors, then the dense and output layers; a Markov table for order `n`
//! is the u32 block `markov.order{n}` with rows `[context.., next, count]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Vocabulary, WordId};
use crate::engine::{Classic, EngineState};
use crate::error::{Error, Result};
use crate::glove::EmbeddingMatrix;
use crate::markov::MarkovModel;
use crate::neural::{NetworkConfig, NetworkParams, Weights};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"DTNG";
pub const FORMAT_VERSION: u32 = 1;

const DTYPE_F32: u8 = 0;
const DTYPE_U32: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Network,
    Markov,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Metadata {
    kind: ModelKind,
    #[serde(default)]
    config: Option<NetworkConfig>,
    words: Vec<String>,
    counts: Vec<u64>,
    #[serde(default)]
    classics: Vec<Classic>,
    seed: u64,
    #[serde(default)]
    markov_order: Option<usize>,
}

enum Payload {
    F32(Vec<f32>),
    U32(Vec<u32>),
}

struct Block {
    name: String,
    dims: Vec<usize>,
    payload: Payload,
}

/// A Markov-only model file: vocabulary plus count tables.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovFile {
    pub vocab: Vocabulary,
    pub model: MarkovModel,
    pub seed: u64,
}

pub fn save_model(path: impl AsRef<Path>, state: &EngineState) -> Result<()> {
    fs::write(path, encode_model(state)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EngineState> {
    decode_model(&fs::read(path)?)
}

pub fn save_markov(path: impl AsRef<Path>, file: &MarkovFile) -> Result<()> {
    fs::write(path, encode_markov(file)?)?;
    Ok(())
}

pub fn load_markov(path: impl AsRef<Path>) -> Result<MarkovFile> {
    decode_markov(&fs::read(path)?)
}

/// Reads only the header and metadata to report what a file holds.
pub fn peek_kind(bytes: &[u8]) -> Result<ModelKind> {
    let mut r = Reader::new(bytes);
    Ok(read_metadata(&mut r)?.kind)
}

pub fn encode_model(state: &EngineState) -> Result<Vec<u8>> {
    let vocab = state.vocab();
    let meta = Metadata {
        kind: ModelKind::Network,
        config: Some(state.config().clone()),
        words: vocab.words().to_vec(),
        counts: vocab.counts().to_vec(),
        classics: state.list_classics().to_vec(),
        seed: state.config().seed,
        markov_order: state.markov().map(MarkovModel::order),
    };
    let net = state.network();
    let mut blocks = vec![f32_block("embedding", net.embedding.tensor())];
    for (name, t) in net.weights.named_tensors() {
        blocks.push(f32_block(&name, t));
    }
    if let Some(m) = state.markov() {
        blocks.extend(markov_blocks(m)?);
    }
    encode(&meta, &blocks)
}

pub fn decode_model(bytes: &[u8]) -> Result<EngineState> {
    let mut r = Reader::new(bytes);
    let meta = read_metadata(&mut r)?;
    if meta.kind != ModelKind::Network {
        return Err(Error::ModelFormat("file holds a Markov model, not a network".into()));
    }
    let cfg = meta
        .config
        .ok_or_else(|| Error::ModelFormat("network file without config".into()))?;
    let vocab = Vocabulary::from_parts(meta.words, meta.counts)?;
    let blocks = read_blocks(&mut r)?;
    let mut blocks = blocks.into_iter();

    let (v, d, h) = (vocab.len(), cfg.embedding_dim, cfg.hidden_size);
    let embedding = EmbeddingMatrix::new(expect_f32(blocks.next(), "embedding", &[v, d])?)?;
    let mut weights = Weights::zeros(d, h, v);
    let expected: Vec<(String, Vec<usize>)> = weights
        .named_tensors()
        .into_iter()
        .map(|(name, t)| (name, t.shape().to_vec()))
        .collect();
    for ((name, shape), slot) in expected.iter().zip(weights.tensors_mut()) {
        *slot = expect_f32(blocks.next(), name, shape)?;
    }
    let net = NetworkParams { embedding, weights };
    let markov = match meta.markov_order {
        Some(order) => Some(read_markov(order, &mut blocks, v)?),
        None => None,
    };
    if let Some(extra) = blocks.next() {
        return Err(Error::ModelFormat(format!("unexpected block {:?}", extra.name)));
    }
    let classics: Vec<Classic> = meta.classics;
    let state = EngineState::new(vocab, net, cfg, classics)?;
    Ok(match markov {
        Some(m) => state.with_markov(m),
        None => state,
    })
}

pub fn encode_markov(file: &MarkovFile) -> Result<Vec<u8>> {
    let meta = Metadata {
        kind: ModelKind::Markov,
        config: None,
        words: file.vocab.words().to_vec(),
        counts: file.vocab.counts().to_vec(),
        classics: Vec::new(),
        seed: file.seed,
        markov_order: Some(file.model.order()),
    };
    encode(&meta, &markov_blocks(&file.model)?)
}

pub fn decode_markov(bytes: &[u8]) -> Result<MarkovFile> {
    let mut r = Reader::new(bytes);
    let meta = read_metadata(&mut r)?;
    if meta.kind != ModelKind::Markov {
        return Err(Error::ModelFormat("file holds a network, not a Markov model".into()));
    }
    let order = meta
        .markov_order
        .ok_or_else(|| Error::ModelFormat("Markov file without order".into()))?;
    let vocab = Vocabulary::from_parts(meta.words, meta.counts)?;
    let mut blocks = read_blocks(&mut r)?.into_iter();
    let model = read_markov(order, &mut blocks, vocab.len())?;
    if let Some(extra) = blocks.next() {
        return Err(Error::ModelFormat(format!("unexpected block {:?}", extra.name)));
    }
    Ok(MarkovFile {
        vocab,
        model,
        seed: meta.seed,
    })
}

fn f32_block(name: &str, t: &Tensor) -> Block {
    Block {
        name: name.to_owned(),
        dims: t.shape().to_vec(),
        payload: Payload::F32(t.data().iter().map(|&v| v as f32).collect()),
    }
}

fn markov_blocks(m: &MarkovModel) -> Result<Vec<Block>> {
    m.to_rows()
        .into_iter()
        .enumerate()
        .map(|(n, rows)| {
            let mut data = Vec::with_capacity(rows.len() * (n + 2));
            for (ctx, next, count) in &rows {
                data.extend_from_slice(ctx);
                data.push(*next);
                data.push(
                    u32::try_from(*count).map_err(|_| Error::ModelFormat("Markov count exceeds u32".into()))?,
                );
            }
            Ok(Block {
                name: format!("markov.order{n}"),
                dims: vec![rows.len(), n + 2],
                payload: Payload::U32(data),
            })
        })
        .collect()
}

fn read_markov(order: usize, blocks: &mut impl Iterator<Item = Block>, vocab_size: usize) -> Result<MarkovModel> {
    let mut tables = Vec::with_capacity(order + 1);
    for n in 0..=order {
        let name = format!("markov.order{n}");
        let block = blocks
            .next()
            .ok_or_else(|| Error::ModelFormat(format!("missing block {name:?}")))?;
        if block.name != name {
            return Err(Error::ModelFormat(format!("expected block {name:?}, found {:?}", block.name)));
        }
        let Payload::U32(data) = block.payload else {
            return Err(Error::ModelFormat(format!("block {name:?} must hold u32 values")));
        };
        if block.dims.len() != 2 || block.dims[1] != n + 2 {
            return Err(Error::ModelFormat(format!("block {name:?} has shape {:?}", block.dims)));
        }
        let mut rows = Vec::with_capacity(block.dims[0]);
        for row in data.chunks_exact(n + 2) {
            if let Some(&id) = row[..=n].iter().find(|&&id| id as usize >= vocab_size) {
                return Err(Error::IdOutOfRange { id, vocab_size });
            }
            rows.push((row[..n].to_vec(), row[n] as WordId, row[n + 1] as u64));
        }
        tables.push(rows);
    }
    MarkovModel::from_rows(order, tables).map_err(|e| Error::ModelFormat(e.to_string()))
}

fn expect_f32(block: Option<Block>, name: &str, shape: &[usize]) -> Result<Tensor> {
    let block = block.ok_or_else(|| Error::ModelFormat(format!("missing block {name:?}")))?;
    if block.name != name {
        return Err(Error::ModelFormat(format!("expected block {name:?}, found {:?}", block.name)));
    }
    if block.dims != shape {
        return Err(Error::ModelFormat(format!(
            "block {name:?} has shape {:?}, expected {:?}",
            block.dims, shape
        )));
    }
    let Payload::F32(data) = block.payload else {
        return Err(Error::ModelFormat(format!("block {name:?} must hold f32 values")));
    };
    Tensor::from_vec(shape, data.into_iter().map(f64::from).collect())
}

fn encode(meta: &Metadata, blocks: &[Block]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&len_u32(json.len())?.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&len_u32(blocks.len())?.to_le_bytes());
    for b in blocks {
        let name_len =
            u16::try_from(b.name.len()).map_err(|_| Error::ModelFormat("block name too long".into()))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(b.name.as_bytes());
        let dtype = match b.payload {
            Payload::F32(_) => DTYPE_F32,
            Payload::U32(_) => DTYPE_U32,
        };
        out.push(dtype);
        out.push(u8::try_from(b.dims.len()).map_err(|_| Error::ModelFormat("too many dimensions".into()))?);
        for &d in &b.dims {
            out.extend_from_slice(&len_u32(d)?.to_le_bytes());
        }
        match &b.payload {
            Payload::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }
    Ok(out)
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::ModelFormat(format!("length {n} exceeds u32")))
}

fn read_metadata(r: &mut Reader<'_>) -> Result<Metadata> {
    if r.take(4)? != MAGIC {
        return Err(Error::ModelFormat("bad magic, not a model file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let len = r.u32()? as usize;
    serde_json::from_slice(r.take(len)?).map_err(|e| Error::ModelFormat(format!("metadata: {e}")))
}

fn read_blocks(r: &mut Reader<'_>) -> Result<Vec<Block>> {
    let count = r.u32()? as usize;
    let mut blocks = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = u16::from_le_bytes(r.array()?) as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::ModelFormat("block name is not UTF-8".into()))?;
        let [dtype, ndim] = r.array()?;
        let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::ModelFormat(format!("block {name:?} is too large")))?;
        let bytes = r.take(len.checked_mul(4).ok_or_else(|| Error::ModelFormat("block too large".into()))?)?;
        let words = bytes.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
        let payload = match dtype {
            DTYPE_F32 => Payload::F32(words.map(f32::from_le_bytes).collect()),
            DTYPE_U32 => Payload::U32(words.map(u32::from_le_bytes).collect()),
            other => return Err(Error::ModelFormat(format!("block {name:?}: unknown dtype {other}"))),
        };
        blocks.push(Block { name, dims, payload });
    }
    if !r.is_done() {
        return Err(Error::ModelFormat("trailing bytes after last block".into()));
    }
    Ok(blocks)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::ModelFormat(format!("truncated file at byte {}", self.buf.len())))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }
}
