//! Tool-using agent that extracts workload metadata from a job's source tree.

pub mod agent;
pub mod tools;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;

pub use agent::{extract_metadata, resolve_metadata, run_agent, write_transcript, AgentRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentBudget {
    pub max_steps: usize,
    pub max_file_bytes: usize,
    pub max_tree_entries: usize,
}

impl Default for AgentBudget {
    fn default() -> Self {
        AgentBudget {
            max_steps: 12,
            max_file_bytes: 64 * 1024,
            max_tree_entries: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AgentAction {
    FileTree,
    FileRead,
    Finish,
    /// The completion did not follow the line protocol.
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub thought: String,
    pub action: AgentAction,
    pub action_input: String,
    pub observation: String,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("job is missing {0}")]
    MissingInput(&'static str),
    #[error("step budget of {steps} exhausted without a final answer")]
    BudgetExhausted { steps: usize },
    #[error("extraction failed: {0}")]
    ExtractionFailed(String),
    #[error("security: {0}")]
    Security(String),
    #[error("tool: {0}")]
    Tool(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}
