//! Embedding exchange format, word-vector tables and the word-averaging
//! baseline encoder.
//!
//! # The `EEV1` container
//!
//! All integers are little-endian.
//!
//! | bytes        | field                                                   |
//! |--------------|---------------------------------------------------------|
//! | 4            | magic `b"EEV1"`                                         |
//! | 4 (`u32`)    | version; low 16 bits = 1, bit 16 set for model files    |
//! | 8 (`u64`)    | number of instances                                     |
//! | 4 (`u32`)    | number of layers                                        |
//! | 4 (`u32`)    | dimension                                               |
//! | 8 (`u64`)    | byte length of the id block                             |
//! | ...          | UTF-8 ids joined by `\n` (no trailing newline)          |
//! | ...          | `f32` payload, instance-major then layer-major          |

use std::collections::HashMap;
use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use log::warn;

use crate::error::{Error, Result};
use crate::types::{EntityDescription, MentionContext};

pub const MAGIC: &[u8; 4] = b"EEV1";
pub const FORMAT_VERSION: u32 = 1;
pub const MODEL_FLAG: u32 = 1 << 16;
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 4 + 8;

/// Per-instance, per-layer fixed-width vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    n_layers: usize,
    dim: usize,
    values: Vec<f32>,
    instance_ids: Vec<String>,
}

impl EmbeddingSet {
    pub fn new(
        instance_ids: Vec<String>,
        n_layers: usize,
        dim: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        let expected = instance_ids
            .len()
            .checked_mul(n_layers)
            .and_then(|v| v.checked_mul(dim))
            .ok_or_else(|| Error::InvalidArgument("embedding set too large".into()))?;
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "embedding set: {} values for {} x {n_layers} x {dim}",
                values.len(),
                instance_ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(instance_ids.len());
        for id in &instance_ids {
            if id.is_empty() || id.contains('\n') {
                return Err(Error::InvalidArgument(format!(
                    "embedding id {id:?} is empty or contains a newline"
                )));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate embedding id {id:?}"
                )));
            }
        }
        Ok(EmbeddingSet {
            n_layers,
            dim,
            values,
            instance_ids,
        })
    }

    /// Builds a set from per-instance layer stacks.
    pub fn from_rows(
        n_layers: usize,
        dim: usize,
        rows: impl IntoIterator<Item = (String, Vec<f32>)>,
    ) -> Result<Self> {
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (id, row) in rows {
            if row.len() != n_layers * dim {
                return Err(Error::InvalidArgument(format!(
                    "row {id}: {} values, expected {}",
                    row.len(),
                    n_layers * dim
                )));
            }
            ids.push(id);
            values.extend(row);
        }
        EmbeddingSet::new(ids, n_layers, dim, values)
    }

    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    /// Vector of `layer` for instance `row`.
    pub fn vector(&self, row: usize, layer: usize) -> &[f32] {
        let start = (row * self.n_layers + layer) * self.dim;
        &self.values[start..start + self.dim]
    }

    /// All layers of instance `row`, layer-major.
    pub fn layers(&self, row: usize) -> &[f32] {
        let width = self.n_layers * self.dim;
        &self.values[row * width..(row + 1) * width]
    }

    /// Map from id to row index.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.instance_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// A single-layer copy holding only `layer`.
    pub fn select_layer(&self, layer: usize) -> Result<EmbeddingSet> {
        if layer >= self.n_layers {
            return Err(Error::InvalidArgument(format!(
                "layer {layer} out of range ({} layers)",
                self.n_layers
            )));
        }
        let mut values = Vec::with_capacity(self.n_instances() * self.dim);
        for row in 0..self.n_instances() {
            values.extend_from_slice(self.vector(row, layer));
        }
        EmbeddingSet::new(self.instance_ids.clone(), 1, self.dim, values)
    }

    /// Order-sensitive FNV-1a digest of ids and payload bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for id in &self.instance_ids {
            eat(id.as_bytes());
            eat(b"\n");
        }
        for v in &self.values {
            eat(&v.to_bits().to_le_bytes());
        }
        h
    }
}

/// Kind of payload stored in an `EEV1` container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    Embeddings,
    Model,
}

/// Serializes `set` into the `EEV1` byte layout.
pub fn encode_container(set: &EmbeddingSet, kind: ContainerKind) -> Vec<u8> {
    let ids = set.instance_ids.join("\n");
    let mut out = Vec::with_capacity(HEADER_LEN + ids.len() + set.values.len() * 4);
    out.extend_from_slice(MAGIC);
    let version = match kind {
        ContainerKind::Embeddings => FORMAT_VERSION,
        ContainerKind::Model => FORMAT_VERSION | MODEL_FLAG,
    };
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(set.n_instances() as u64).to_le_bytes());
    out.extend_from_slice(&(set.n_layers as u32).to_le_bytes());
    out.extend_from_slice(&(set.dim as u32).to_le_bytes());
    out.extend_from_slice(&(ids.len() as u64).to_le_bytes());
    out.extend_from_slice(ids.as_bytes());
    for v in &set.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::format(
                self.pos as u64,
                format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses an `EEV1` container.
pub fn decode_container(bytes: &[u8]) -> Result<(ContainerKind, EmbeddingSet)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {magic:?}, expected \"EEV1\""),
        ));
    }
    let version = cur.u32("version")?;
    if version & 0xffff != FORMAT_VERSION || version & !(0xffff | MODEL_FLAG) != 0 {
        return Err(Error::format(
            4,
            format!("unsupported version {version:#x}"),
        ));
    }
    let kind = if version & MODEL_FLAG != 0 {
        ContainerKind::Model
    } else {
        ContainerKind::Embeddings
    };
    let n = cur.u64("instance count")?;
    let n_layers = cur.u32("layer count")? as u64;
    let dim = cur.u32("dimension")? as u64;
    let id_len_offset = cur.pos as u64;
    let id_len = cur.u64("id block length")?;
    let id_len = usize::try_from(id_len)
        .map_err(|_| Error::format(id_len_offset, "id block length overflows"))?;
    let id_offset = cur.pos as u64;
    let id_block = cur.take(id_len, "id block")?;
    let id_block = std::str::from_utf8(id_block)
        .map_err(|e| Error::format(id_offset + e.valid_up_to() as u64, "id block is not UTF-8"))?;
    let ids: Vec<String> = if id_block.is_empty() {
        Vec::new()
    } else {
        id_block.split('\n').map(str::to_owned).collect()
    };
    if ids.len() as u64 != n {
        return Err(Error::format(
            id_offset,
            format!(
                "header declares {n} instances but id block holds {}",
                ids.len()
            ),
        ));
    }
    let payload_offset = cur.pos as u64;
    let count = n
        .checked_mul(n_layers)
        .and_then(|v| v.checked_mul(dim))
        .and_then(|v| usize::try_from(v).ok())
        .filter(|v| v.checked_mul(4).is_some())
        .ok_or_else(|| Error::format(8, "payload size overflows"))?;
    let payload = cur.take(count * 4, "payload")?;
    if cur.pos != bytes.len() {
        return Err(Error::format(
            cur.pos as u64,
            format!("{} trailing bytes after payload", bytes.len() - cur.pos),
        ));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let set = EmbeddingSet::new(ids, n_layers as usize, dim as usize, values)
        .map_err(|e| Error::format(payload_offset, e.to_string()))?;
    Ok((kind, set))
}

pub fn write_container(set: &EmbeddingSet, kind: ContainerKind, path: &Path) -> Result<()> {
    let bytes = encode_container(set, kind);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_container(path: &Path) -> Result<(ContainerKind, EmbeddingSet)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes)
}

pub fn write_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    write_container(set, ContainerKind::Embeddings, path)
}

/// Reads an embedding file; model checkpoints are rejected.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    match read_container(path)? {
        (ContainerKind::Embeddings, set) => Ok(set),
        (ContainerKind::Model, _) => Err(Error::format(
            4,
            format!(
                "{} is a model checkpoint, not an embedding set",
                path.display()
            ),
        )),
    }
}

/// Token to vector lookup with a fixed dimension.
#[derive(Debug, Clone, Default)]
pub struct WordVectorTable {
    dim: usize,
    entries: HashMap<String, Vec<f32>>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        WordVectorTable {
            dim,
            entries: HashMap::new(),
        }
    }

    /// Inserts a vector; returns `false` when the token already exists.
    pub fn insert(&mut self, token: &str, vector: Vec<f32>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "vector for {token:?} has {} dims, table has {}",
                vector.len(),
                self.dim
            )));
        }
        let key = token.to_lowercase();
        if self.entries.contains_key(&key) {
            return Ok(false);
        }
        self.entries.insert(key, vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// Mean of in-vocabulary vectors; `None` when every token is OOV.
    pub fn average<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<f32>> {
        let mut sum = vec![0f64; self.dim];
        let mut hits = 0usize;
        for tok in tokens {
            if let Some(v) = self.get(tok.as_ref()) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += *x as f64;
                }
                hits += 1;
            }
        }
        (hits > 0).then(|| sum.into_iter().map(|s| (s / hits as f64) as f32).collect())
    }
}

/// A parsed word-vector file and the number of duplicate tokens skipped.
#[derive(Debug, Clone)]
pub struct LoadedVectors {
    pub table: WordVectorTable,
    pub duplicate_warnings: usize,
}

/// Parses `token v1 v2 ... vd` lines. Blank lines are skipped.
pub fn parse_word_vectors(text: &str, source: &str) -> Result<LoadedVectors> {
    let mut table: Option<WordVectorTable> = None;
    let mut duplicates = 0;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let vector = fields
            .map(|f| {
                f.parse::<f32>()
                    .map_err(|_| Error::parse(source, lineno, format!("bad float {f:?}")))
            })
            .collect::<Result<Vec<f32>>>()?;
        if vector.is_empty() {
            return Err(Error::parse(source, lineno, "token without vector"));
        }
        let table = table.get_or_insert_with(|| WordVectorTable::new(vector.len()));
        if vector.len() != table.dim {
            return Err(Error::parse(
                source,
                lineno,
                format!("{} values, expected {}", vector.len(), table.dim),
            ));
        }
        if !table.insert(token, vector)? {
            warn!("{source}:{lineno}: duplicate token {token:?}, keeping first");
            duplicates += 1;
        }
    }
    Ok(LoadedVectors {
        table: table.unwrap_or_default(),
        duplicate_warnings: duplicates,
    })
}

pub fn load_word_vectors(path: &Path) -> Result<LoadedVectors> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word_vectors(&text, &path.display().to_string())
}

/// The word-averaging baseline encoder.
///
/// Out-of-vocabulary tokens are skipped; an input with no known token
/// encodes to the zero vector and bumps [`AvgVecEncoder::all_oov_count`].
#[derive(Debug)]
pub struct AvgVecEncoder<'a> {
    table: &'a WordVectorTable,
    all_oov: AtomicUsize,
}

impl<'a> AvgVecEncoder<'a> {
    pub fn new(table: &'a WordVectorTable) -> Self {
        AvgVecEncoder {
            table,
            all_oov: AtomicUsize::new(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn all_oov_count(&self) -> usize {
        self.all_oov.load(Ordering::Relaxed)
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f32> {
        self.table.average(tokens).unwrap_or_else(|| {
            self.all_oov.fetch_add(1, Ordering::Relaxed);
            vec![0.0; self.table.dim()]
        })
    }

    pub fn encode_mention(&self, mention: &MentionContext) -> Vec<f32> {
        self.encode_tokens(mention.mention_tokens())
    }

    pub fn encode_description(&self, desc: &EntityDescription) -> Vec<f32> {
        self.encode_tokens(desc.tokens())
    }
}
