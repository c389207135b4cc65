//! Shared domain types, file formats and metric formulas.

pub mod config;
pub mod job;
pub mod logdoc;
pub mod metadata;
pub mod report;
pub mod trace;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    AdvisorConfig, CategoryLabels, Config, PackingConfig, PolicyConfig, SimConfig, TrackerConfig,
    TriageConfig,
};
pub use job::{
    util_bucket, Component, ErrorCategory, FailureKind, FinalStatus, JobSpec, JobTruth,
    TraceRecord,
};
pub use logdoc::LogDocument;
pub use metadata::WorkloadMetadata;
pub use report::{compute_report, empirical_cdf, relative_errors, rmsre, JobRecord, SimReport};
pub use trace::{parse_trace, parse_trace_file, serialize_trace, write_trace_file};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
    #[error("line {line}, column `{column}`: {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },
}

/// Homogeneous cluster shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub nodes: u32,
    pub gpus_per_node: u32,
}

impl ClusterSpec {
    pub fn new(nodes: u32, gpus_per_node: u32) -> Self {
        ClusterSpec {
            nodes,
            gpus_per_node,
        }
    }

    pub fn total_gpus(&self) -> u32 {
        self.nodes * self.gpus_per_node
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.nodes == 0 || self.gpus_per_node == 0 {
            return Err(ModelError::Invalid(
                "cluster needs at least one node and one GPU per node".into(),
            ));
        }
        Ok(())
    }

    /// Accepts JSON or TOML.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let spec: ClusterSpec = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ModelError::Invalid(format!("cluster: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| ModelError::Invalid(format!("cluster: {e}")))?
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Where an estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimateSource {
    Retrieval,
    FallbackModel,
    Profiled,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub duration_s: f64,
    pub sm_util: f64,
    pub source: EstimateSource,
    pub matched_job_ids: Vec<String>,
}
