//! Deterministic discrete-event simulator of a homogeneous GPU cluster.
//!
//! Work is tracked in integer micro-units (one million per exclusive second)
//! and rates in parts per million, so every accounting step is exact.

pub mod engine;
pub mod prep;
pub mod synth;
pub mod view;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::model::ModelError;

pub use engine::{run_simulation, SimOutput, SimStats, WorkAudit};
pub use prep::{observe_profile, prepare_trace, runtime_s, PrepOptions, PreparedJob, PreparedTrace, Verdict};
pub use view::{ClusterView, JobState, Phase, Planner};

/// Work units per exclusive second.
pub const UNITS: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("t={time}: invalid action {action}: {reason}")]
    InvalidAction {
        time: u64,
        action: String,
        reason: String,
    },
    #[error("configuration: {0}")]
    Config(String),
    #[error("trace preparation: {0}")]
    Prep(String),
    #[error("work audit failed: {0}")]
    Audit(String),
    #[error("simulation stalled at t={time} with {pending} unfinished jobs")]
    Stalled { time: u64, pending: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// One placement decision. Jobs are indices into the prepared trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Start { job: usize, gpus: Vec<u32> },
    /// Co-locate `job` on the first GPUs of running job `onto`.
    Pack { job: usize, onto: usize },
    Evict { job: usize },
    Profile { job: usize },
    /// Checkpoint-safe preemption back to the queue.
    Preempt { job: usize },
    Noop,
}

/// Ordering within a timestamp follows declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Arrival,
    ProfileDone,
    StepProgressCheck,
    Failure,
    JobDone,
    EvictionCheck,
    RestartReady,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Arrival => "ARRIVAL",
            EventKind::ProfileDone => "PROFILE_DONE",
            EventKind::StepProgressCheck => "STEP_PROGRESS_CHECK",
            EventKind::Failure => "FAILURE",
            EventKind::JobDone => "JOB_DONE",
            EventKind::EvictionCheck => "EVICTION_CHECK",
            EventKind::RestartReady => "RESTART_READY",
        }
    }
}
