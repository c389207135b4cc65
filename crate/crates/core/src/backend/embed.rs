use serde::{Deserialize, Serialize};

use super::BackendError;

pub const DEFAULT_DIM: usize = 1024;

/// Dense vector, usually L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Embedding { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Scales to unit length; the zero vector is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        Embedding {
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// `dot(a, b) / (|a| |b|)`, or 0 when either vector is zero.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, BackendError> {
    if a.dim() != b.dim() {
        return Err(BackendError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding, BackendError>;

    /// Unnormalized `(index, weight)` pairs, for embedders where this is cheap.
    fn embed_sparse(&self, _text: &str) -> Option<Vec<(usize, f64)>> {
        None
    }
}

/// Lowercase alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Offline embedder: token counts hashed into `dim` buckets, then L2-normalized.
///
/// Identical token multisets give identical vectors regardless of order.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder {
            dim: DEFAULT_DIM,
            seed: 0x5eed,
        }
    }
}

impl HashingEmbedder {
    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(self.seed, token.as_bytes()) % self.dim as u64) as usize
    }

    pub fn embed_text(&self, text: &str) -> Embedding {
        let mut v = vec![0.0; self.dim];
        for tok in tokenize(text) {
            v[self.bucket(&tok)] += 1.0;
        }
        Embedding::new(v).normalized()
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        Ok(self.embed_text(text))
    }

    fn embed_sparse(&self, text: &str) -> Option<Vec<(usize, f64)>> {
        let mut idx: Vec<usize> = tokenize(text).map(|t| self.bucket(&t)).collect();
        idx.sort_unstable();
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(idx.len());
        for i in idx {
            match out.last_mut() {
                Some((j, w)) if *j == i => *w += 1.0,
                _ => out.push((i, 1.0)),
            }
        }
        Some(out)
    }
}
