//! Deterministic generators for traces, source-tree fixtures and labeled logs.
//!
//! Every generator is a pure function of its spec and seed.

pub mod logs;
pub mod repos;
pub mod trace;
pub mod vocab;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{write_trace_file, WorkloadMetadata};

pub use logs::{
    gen_failure_corpus, gen_failure_log, gen_training_corpus, gen_training_log, read_corpus,
    write_corpus, FailureCorpusSpec, FailureLabel, FailureLogSpec, TrainingCorpusSpec,
    TrainingLabel, TrainingLogSpec,
};
pub use repos::write_repo;
pub use trace::{gen_trace, Family, GeneratedTrace, TraceSpec};
pub use vocab::ProgressStyle;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid corpus spec: {0}")]
    Spec(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
}

impl GeneratedTrace {
    /// Writes one fixture repository per family under `repos/` and points every
    /// job at its family's repository instead of a pre-extracted document.
    pub fn write_with_repos(&self, dir: &Path) -> Result<PathBuf, CorpusError> {
        fs::create_dir_all(dir)?;
        let mut commands = Vec::with_capacity(self.families.len());
        for (i, fam) in self.families.iter().enumerate() {
            commands.push(write_repo(&dir.join("repos").join(&fam.name), &fam.metadata, i)?);
        }
        let mut records = self.records.clone();
        for (r, &f) in records.iter_mut().zip(&self.family_of) {
            r.spec.metadata_path = None;
            r.spec.workdir = Some(PathBuf::from("repos").join(&self.families[f].name));
            r.spec.launch_command = Some(commands[f].clone());
        }
        let path = dir.join("trace.csv");
        write_trace_file(&records, &path).map_err(|e| CorpusError::Format(e.to_string()))?;
        Ok(path)
    }
}

/// Shape of a repository fixture corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepoCorpusSpec {
    pub num_repos: usize,
}

impl Default for RepoCorpusSpec {
    fn default() -> Self {
        RepoCorpusSpec { num_repos: 20 }
    }
}

/// Index entry of a generated repository.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoLabel {
    pub id: String,
    pub workdir: PathBuf,
    pub launch_command: String,
    pub metadata: WorkloadMetadata,
}

/// Writes `num_repos` repositories plus a `repos.jsonl` index with their metadata.
pub fn gen_repo_corpus(spec: &RepoCorpusSpec, seed: u64, dir: &Path) -> Result<Vec<RepoLabel>, CorpusError> {
    let trace_spec = TraceSpec {
        num_jobs: spec.num_repos.max(1),
        num_families: spec.num_repos.max(1),
        ..TraceSpec::default()
    };
    let g = gen_trace(&trace_spec, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7265_706f);
    fs::create_dir_all(dir)?;
    let mut index = fs::File::create(dir.join("repos.jsonl"))?;
    let mut out = Vec::new();
    for fam in g.families.iter().take(spec.num_repos) {
        let rel = PathBuf::from(&fam.name);
        let cmd = write_repo(&dir.join(&rel), &fam.metadata, rng.random_range(0..3))?;
        let label = RepoLabel {
            id: fam.name.clone(),
            workdir: rel,
            launch_command: cmd,
            metadata: fam.metadata.clone(),
        };
        let line = serde_json::to_string(&label).map_err(|e| CorpusError::Format(e.to_string()))?;
        writeln!(index, "{line}")?;
        out.push(label);
    }
    Ok(out)
}

pub fn read_repo_corpus(dir: &Path) -> Result<Vec<RepoLabel>, CorpusError> {
    let text = fs::read_to_string(dir.join("repos.jsonl"))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::Format(format!("repos.jsonl line {}: {e}", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repo_corpus_is_byte_identical_across_runs() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let la = gen_repo_corpus(&RepoCorpusSpec { num_repos: 6 }, 5, a.path()).unwrap();
        let lb = gen_repo_corpus(&RepoCorpusSpec { num_repos: 6 }, 5, b.path()).unwrap();
        assert_eq!(la, lb);
        assert_eq!(read_repo_corpus(a.path()).unwrap(), la);
        for l in &la {
            for f in ["README.md", "data/shard-000.bin"] {
                assert_eq!(
                    fs::read(a.path().join(&l.workdir).join(f)).unwrap(),
                    fs::read(b.path().join(&l.workdir).join(f)).unwrap()
                );
            }
        }
    }
}
