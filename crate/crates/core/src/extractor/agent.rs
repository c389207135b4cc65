use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::tools::{file_read, file_tree, resolve_within};
use super::{AgentAction, AgentBudget, AgentStep, ExtractError};
use crate::backend::mock::OBSERVATION_END;
use crate::backend::{CompletionRequest, Completer, SchemaId};
use crate::model::{JobSpec, WorkloadMetadata};

const SYSTEM_PROMPT: &str = "\
You inspect the source tree of a deep-learning training job and report what it trains.
Two tools are available:
  file_tree  - input: a directory relative to the repository root (use `.` for the root); lists source and config files
  file_read  - input: a file path exactly as it appeared in a listing; returns the beginning of the file
Answer every turn with exactly three lines and nothing else:
Thought: <one sentence of reasoning>
Action: <file_tree | file_read | finish>
Action Input: <tool input, or for finish a single JSON object>
The finish object has three sections:
  model_config:    model_name (required), task_type (required), any other model settings
  training_config: iters (required, integer), iter_type (required, e.g. step or epoch), other training settings
  dataset_config:  train (required), valid (required), other dataset settings
Only read files you have seen in a listing or in the launch command.";

const NUDGE: &str = "Your previous reply could not be parsed. Reply with exactly the three lines \
`Thought:`, `Action:` and `Action Input:`.";

/// Transcript plus final result of one extraction.
#[derive(Debug)]
pub struct AgentRun {
    pub steps: Vec<AgentStep>,
    pub result: Result<WorkloadMetadata, ExtractError>,
}

fn config_mentions(command: &str) -> Vec<String> {
    command
        .split_whitespace()
        .flat_map(|t| t.split('='))
        .map(|t| t.trim_matches(|c| c == '"' || c == '\'').trim_start_matches("./"))
        .filter(|t| {
            Path::new(t)
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| super::tools::TREE_EXTENSIONS.contains(&e))
                .unwrap_or(false)
        })
        .map(str::to_string)
        .collect()
}

fn header(workdir: &Path, command: &str) -> String {
    let mentioned = config_mentions(command);
    let launch = if mentioned.is_empty() {
        "(no config files named in the command)".to_string()
    } else {
        mentioned.join(", ")
    };
    format!(
        "Question: what are the model, training and dataset settings of this job?\n\
         Repository: {}\nTraining command: {command}\nLaunch configuration: {launch}\n",
        workdir.display()
    )
}

fn append_turn(transcript: &mut String, step: &AgentStep) {
    let action = match step.action {
        AgentAction::FileTree => "file_tree",
        AgentAction::FileRead => "file_read",
        AgentAction::Finish => "finish",
        AgentAction::Malformed => return,
    };
    transcript.push_str(&format!(
        "Thought: {}\nAction: {action}\nAction Input: {}\nObservation:\n{}\n{OBSERVATION_END}\n",
        step.thought, step.action_input, step.observation
    ));
}

/// Runs the agent loop; always returns the transcript, even on failure.
pub fn run_agent(
    workdir: &Path,
    command: &str,
    completer: &dyn Completer,
    budget: &AgentBudget,
) -> AgentRun {
    let mut steps = Vec::new();
    let result = agent_loop(workdir, command, completer, budget, &mut steps);
    AgentRun { steps, result }
}

fn agent_loop(
    workdir: &Path,
    command: &str,
    completer: &dyn Completer,
    budget: &AgentBudget,
    steps: &mut Vec<AgentStep>,
) -> Result<WorkloadMetadata, ExtractError> {
    if !workdir.is_dir() {
        return Err(ExtractError::Tool(format!(
            "{} is not a directory",
            workdir.display()
        )));
    }
    let mut transcript = header(workdir, command);
    let mut grounded: BTreeSet<String> = config_mentions(command).into_iter().collect();
    let mut nudge_pending = false;
    let mut nudged = false;

    while steps.len() < budget.max_steps {
        let mut prompt = transcript.clone();
        if nudge_pending {
            prompt.push_str(NUDGE);
            prompt.push('\n');
            nudge_pending = false;
        }
        let reply = completer.complete(&CompletionRequest::new(
            SchemaId::ReactStep,
            SYSTEM_PROMPT,
            prompt,
        ))?;
        let parsed = match reply.parsed.filter(|_| reply.ok) {
            Some(p) => p,
            None => {
                steps.push(AgentStep {
                    thought: String::new(),
                    action: AgentAction::Malformed,
                    action_input: reply.raw_text,
                    observation: "reply did not follow the line protocol".into(),
                });
                if !nudged {
                    nudged = true;
                    nudge_pending = true;
                }
                continue;
            }
        };
        let field = |k: &str| parsed.get(k).and_then(Value::as_str).unwrap_or("").to_string();
        let thought = field("thought");
        let input = field("action_input");
        let mut step = AgentStep {
            thought,
            action: AgentAction::Malformed,
            action_input: input.clone(),
            observation: String::new(),
        };
        match field("action").as_str() {
            "file_tree" => {
                step.action = AgentAction::FileTree;
                step.observation = tree_observation(workdir, &input, budget, &mut grounded);
            }
            "file_read" => {
                step.action = AgentAction::FileRead;
                let rel = input.trim().trim_start_matches("./").to_string();
                step.action_input = rel.clone();
                step.observation = if grounded.contains(&rel) {
                    match file_read(workdir, &rel, budget) {
                        Ok(c) => c.render(),
                        Err(e) => format!("error: {e}"),
                    }
                } else {
                    format!("refused: `{rel}` has not appeared in a listing or the launch command")
                };
            }
            "finish" => {
                step.action = AgentAction::Finish;
                let outcome = WorkloadMetadata::from_json(&input);
                step.observation = match &outcome {
                    Ok(_) => "accepted".into(),
                    Err(e) => format!("rejected: {e}"),
                };
                steps.push(step);
                return outcome.map_err(|e| ExtractError::ExtractionFailed(e.to_string()));
            }
            other => {
                step.observation = format!("unknown action `{other}`");
            }
        }
        append_turn(&mut transcript, &step);
        steps.push(step);
    }
    Err(ExtractError::BudgetExhausted {
        steps: budget.max_steps,
    })
}

fn tree_observation(
    root: &Path,
    input: &str,
    budget: &AgentBudget,
    grounded: &mut BTreeSet<String>,
) -> String {
    let sub = input.trim().trim_start_matches("./").trim_end_matches('/');
    let (dir, prefix) = if sub.is_empty() || sub == "." {
        (root.to_path_buf(), String::new())
    } else {
        match resolve_within(root, sub) {
            Ok(p) => (p, format!("{sub}/")),
            Err(e) => return format!("error: {e}"),
        }
    };
    match file_tree(&dir, budget) {
        Ok(mut listing) => {
            for e in &mut listing.entries {
                e.insert_str(0, &prefix);
                grounded.insert(e.clone());
            }
            listing.render()
        }
        Err(e) => format!("error: {e}"),
    }
}

/// Extracts metadata for a job from its workdir and launch command.
pub fn extract_metadata(
    spec: &JobSpec,
    completer: &dyn Completer,
    budget: &AgentBudget,
) -> Result<(WorkloadMetadata, Vec<AgentStep>), ExtractError> {
    let workdir = spec
        .workdir
        .as_ref()
        .ok_or(ExtractError::MissingInput("workdir"))?;
    let command = spec
        .launch_command
        .as_ref()
        .ok_or(ExtractError::MissingInput("launch_command"))?;
    let run = run_agent(workdir, command, completer, budget);
    run.result.map(|md| (md, run.steps))
}

/// Pre-extracted document when `metadata_path` is set, otherwise runs the agent.
///
/// Relative paths in the spec are resolved against `base_dir`.
pub fn resolve_metadata(
    spec: &JobSpec,
    base_dir: &Path,
    completer: &dyn Completer,
    budget: &AgentBudget,
) -> Result<(WorkloadMetadata, Option<Vec<AgentStep>>), ExtractError> {
    let abs = |p: &PathBuf| {
        if p.is_absolute() {
            p.clone()
        } else {
            base_dir.join(p)
        }
    };
    if let Some(p) = &spec.metadata_path {
        let path = abs(p);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| ExtractError::Tool(format!("{}: {e}", path.display())))?;
        let md = WorkloadMetadata::from_json(&text)
            .map_err(|e| ExtractError::ExtractionFailed(format!("{}: {e}", path.display())))?;
        return Ok((md, None));
    }
    let mut local = spec.clone();
    local.workdir = spec.workdir.as_ref().map(abs);
    let (md, steps) = extract_metadata(&local, completer, budget)?;
    Ok((md, Some(steps)))
}

/// Writes one JSON line per step to `<dir>/<job_id>.jsonl`.
pub fn write_transcript(dir: &Path, job_id: &str, steps: &[AgentStep]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let safe: String = job_id
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let path = dir.join(format!("{safe}.jsonl"));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    for s in steps {
        serde_json::to_writer(&mut f, s)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(path)
}
