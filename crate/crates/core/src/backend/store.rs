//! Exact in-memory vector store with a line-oriented snapshot format.
//!
//! Snapshot layout (UTF-8 text):
//!
//! ```text
//! SMSTORE 1 <dim> <count>\n
//! {"job_id":...,"vector":[...],"metadata":{...},"outcome":{...}}\n   (count lines, job_id order)
//! ```

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::embed::{cosine, Embedding};
use super::BackendError;
use crate::model::{FinalStatus, WorkloadMetadata};

const MAGIC: &str = "SMSTORE";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub duration_s: f64,
    #[serde(default)]
    pub sm_util: Option<f64>,
    pub status: FinalStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub vector: Embedding,
    pub metadata: WorkloadMetadata,
    pub outcome: JobOutcome,
}

#[derive(Serialize, Deserialize)]
struct SnapshotLine {
    job_id: String,
    vector: Embedding,
    metadata: WorkloadMetadata,
    outcome: JobOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dim: usize,
    entries: BTreeMap<String, StoreEntry>,
}

/// Store shared between concurrent readers and exclusive writers.
pub type SharedStore = Arc<RwLock<VectorStore>>;

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        VectorStore {
            dim,
            entries: BTreeMap::new(),
        }
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

    pub fn get(&self, job_id: &str) -> Option<&StoreEntry> {
        self.entries.get(job_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &StoreEntry)> {
        self.entries.iter()
    }

    /// Inserts or overwrites the entry for `job_id`.
    pub fn upsert(&mut self, job_id: &str, entry: StoreEntry) -> Result<(), BackendError> {
        if entry.vector.dim() != self.dim {
            return Err(BackendError::DimensionMismatch {
                left: self.dim,
                right: entry.vector.dim(),
            });
        }
        self.entries.insert(job_id.to_string(), entry);
        Ok(())
    }

    /// Exact top-`k` by cosine among entries scoring at least `threshold`.
    ///
    /// Ordered by score descending, then job_id ascending.
    pub fn search(
        &self,
        query: &Embedding,
        threshold: f64,
        k: usize,
    ) -> Result<Vec<(String, f64)>, BackendError> {
        if query.dim() != self.dim {
            return Err(BackendError::DimensionMismatch {
                left: self.dim,
                right: query.dim(),
            });
        }
        let mut hits = Vec::new();
        for (id, e) in &self.entries {
            let s = cosine(query, &e.vector)?;
            if s >= threshold {
                hits.push((id.clone(), s));
            }
        }
        hits.sort_by(rank_order);
        hits.truncate(k);
        Ok(hits)
    }

    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<(), BackendError> {
        writeln!(w, "{MAGIC} {VERSION} {} {}", self.dim, self.entries.len())?;
        for (id, e) in &self.entries {
            let line = SnapshotLine {
                job_id: id.clone(),
                vector: e.vector.clone(),
                metadata: e.metadata.clone(),
                outcome: e.outcome.clone(),
            };
            serde_json::to_writer(&mut w, &line)
                .map_err(|err| BackendError::Snapshot(err.to_string()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(r: R) -> Result<Self, BackendError> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| BackendError::Snapshot("empty snapshot".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let bad = || BackendError::Snapshot(format!("bad header `{header}`"));
        if parts.len() != 4 || parts[0] != MAGIC {
            return Err(bad());
        }
        let version: u32 = parts[1].parse().map_err(|_| bad())?;
        if version != VERSION {
            return Err(BackendError::Snapshot(format!("unsupported version {version}")));
        }
        let dim: usize = parts[2].parse().map_err(|_| bad())?;
        let count: usize = parts[3].parse().map_err(|_| bad())?;
        let mut store = VectorStore::new(dim);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SnapshotLine = serde_json::from_str(&line)
                .map_err(|e| BackendError::Snapshot(format!("record {}: {e}", i + 1)))?;
            store.upsert(
                &rec.job_id,
                StoreEntry {
                    vector: rec.vector,
                    metadata: rec.metadata,
                    outcome: rec.outcome,
                },
            )?;
        }
        if store.len() != count {
            return Err(BackendError::Snapshot(format!(
                "header promises {count} records, found {}",
                store.len()
            )));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        let f = std::fs::File::create(path)?;
        self.write_snapshot(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Self::read_snapshot(std::fs::File::open(path)?)
    }
}

fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}
