//! Deterministic offline completer driven by rule tables.
//!
//! Every reply is a pure function of `(schema, user_prompt)`; the system
//! prompt is ignored. Replies are produced as raw text and then validated the
//! same way an HTTP reply would be.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::{json, Map, Value};

use super::schema::SchemaId;
use super::{check_prompts, BackendError, CompletionRequest, CompletionResult, Completer};
use crate::model::{Component, ErrorCategory};

#[derive(Debug, Clone, Copy, Default)]
pub struct MockCompleter;

impl Completer for MockCompleter {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        check_prompts(req)?;
        Ok(CompletionResult::from_raw(req.schema, mock_reply(req.schema, &req.user_prompt)))
    }
}

pub fn mock_reply(schema: SchemaId, input: &str) -> String {
    match schema {
        SchemaId::MetricLine => match parse_metric_line(input) {
            Some((step, t)) => json!({"step": step, "step_time_s": t}).to_string(),
            None => "no step-time metric in this line".into(),
        },
        SchemaId::FailureClass => match first_failure_signature(input) {
            Some((cat, comp)) => {
                json!({"error_type": cat.as_str(), "faulty_component": comp.as_str()}).to_string()
            }
            None => "could not determine a failure cause".into(),
        },
        SchemaId::FailureComponent => match first_component(input) {
            Some(comp) => json!({ "faulty_component": comp.as_str() }).to_string(),
            None => "no hardware component implicated".into(),
        },
        SchemaId::WorkloadMetadata => {
            let facts = Facts::from_text(input);
            match facts.document() {
                Some(doc) => doc.to_string(),
                None => "insufficient information".into(),
            }
        }
        SchemaId::ReactStep => agent_turn(input),
    }
}

struct MetricPatterns {
    step: Regex,
    step_time: Regex,
    per_iteration: Regex,
    sec_per_it: Regex,
}

fn metric_patterns() -> &'static MetricPatterns {
    static P: OnceLock<MetricPatterns> = OnceLock::new();
    P.get_or_init(|| MetricPatterns {
        step: Regex::new(r"(?i)\b(?:step|iteration|iter|it)\s*[:=#]?\s*(\d+)\b").unwrap(),
        step_time: Regex::new(r"(?i)step[_ ]time\s*[:=]?\s*(\d+(?:\.\d+)?)\s*(ms|s)?\b").unwrap(),
        per_iteration: Regex::new(
            r"(?i)time per (?:iteration|step)\s*(?:\((ms|s)\))?\s*[:=]\s*(\d+(?:\.\d+)?)",
        )
        .unwrap(),
        sec_per_it: Regex::new(r"(?i)(\d+(?:\.\d+)?)\s*s/it\b").unwrap(),
    })
}

fn seconds(value: &str, unit: Option<&str>) -> Option<f64> {
    let v: f64 = value.parse().ok()?;
    let t = match unit.map(|u| u.to_ascii_lowercase()) {
        Some(u) if u == "ms" => v / 1000.0,
        _ => v,
    };
    (t > 0.0).then_some(t)
}

/// `(step, step_time_s)` from a single progress line.
pub fn parse_metric_line(line: &str) -> Option<(Option<u64>, f64)> {
    let p = metric_patterns();
    let t = if let Some(c) = p.step_time.captures(line) {
        seconds(&c[1], c.get(2).map(|m| m.as_str()))
    } else if let Some(c) = p.per_iteration.captures(line) {
        seconds(&c[2], c.get(1).map(|m| m.as_str()))
    } else if let Some(c) = p.sec_per_it.captures(line) {
        seconds(&c[1], None)
    } else {
        None
    }?;
    let step = p.step.captures(line).and_then(|c| c[1].parse().ok());
    Some((step, t))
}

/// Ordered failure signatures; the first matching rule on the first matching line wins.
const FAILURE_RULES: &[(&str, ErrorCategory, Component)] = &[
    (r"nvlink", ErrorCategory::Infra, Component::Nvlink),
    (
        r"xid[ :]+\d+|uncorrectable ecc|ecc error|fallen off the bus|gpu .*(lost|unavailable|not responding)",
        ErrorCategory::Infra,
        Component::Gpu,
    ),
    (
        r"nccl.*(timeout|timed out|watchdog)|connection reset by peer|network is unreachable|ib(v)?[ _].*(error|down)|infiniband.*(error|down)",
        ErrorCategory::Infra,
        Component::Network,
    ),
    (
        r"node .*(unreachable|not responding|is down)|heartbeat lost|kernel panic|host memory exhausted",
        ErrorCategory::Infra,
        Component::Node,
    ),
    (
        r"device-side assert|out of memory|keyerror|indexerror|valueerror|typeerror|nameerror|filenotfounderror|zerodivisionerror|size mismatch|shape mismatch",
        ErrorCategory::UserScript,
        Component::None,
    ),
    (
        r"importerror|modulenotfounderror|version mismatch|internal assert|not implemented for|incompatible (checkpoint|version)|deepspeed.*error|megatron.*error",
        ErrorCategory::Framework,
        Component::None,
    ),
];

fn failure_rules() -> &'static [(Regex, ErrorCategory, Component)] {
    static R: OnceLock<Vec<(Regex, ErrorCategory, Component)>> = OnceLock::new();
    R.get_or_init(|| {
        FAILURE_RULES
            .iter()
            .map(|(p, c, k)| (Regex::new(&format!("(?i){p}")).unwrap(), *c, *k))
            .collect()
    })
}

/// Classifies a single line by the rule table.
pub fn line_signature(line: &str) -> Option<(ErrorCategory, Component)> {
    failure_rules()
        .iter()
        .find(|(re, _, _)| re.is_match(line))
        .map(|(_, c, k)| (*c, *k))
}

pub fn first_failure_signature(window: &str) -> Option<(ErrorCategory, Component)> {
    window.lines().find_map(line_signature)
}

fn first_component(window: &str) -> Option<Component> {
    window.lines().find_map(|l| match line_signature(l) {
        Some((ErrorCategory::Infra, comp)) => Some(comp),
        _ => None,
    })
}

// ---------------------------------------------------------------------------
// Scripted agent

const MODEL_KEYS: [&str; 4] = ["model_name", "model", "arch", "model_type"];
const TASK_KEYS: [&str; 2] = ["task_type", "task"];
const ITER_KEYS: [(&str, &str); 7] = [
    ("iters", "step"),
    ("train_iters", "step"),
    ("max_steps", "step"),
    ("total_steps", "step"),
    ("num_iterations", "step"),
    ("epochs", "epoch"),
    ("num_epochs", "epoch"),
];
const TRAIN_KEYS: [&str; 5] = ["train", "train_data", "train_path", "train_file", "dataset"];
const VALID_KEYS: [&str; 5] = ["valid", "valid_data", "validation", "val_data", "eval_data"];
const MODEL_EXTRAS: [&str; 8] = [
    "d_model", "n_layer", "n_head", "hidden_size", "num_layers", "num_heads", "seq_len",
    "vocab_size",
];
const TRAINING_EXTRAS: [&str; 6] = [
    "batch_size",
    "global_batch_size",
    "micro_batch_size",
    "lr",
    "learning_rate",
    "optimizer",
];
const DATASET_EXTRAS: [&str; 2] = ["tokenizer", "num_workers"];

fn kv_patterns() -> &'static (Regex, Regex, Regex) {
    static P: OnceLock<(Regex, Regex, Regex)> = OnceLock::new();
    P.get_or_init(|| {
        (
            Regex::new(r#"^\s*(?:-\s+)?["']?([A-Za-z_][A-Za-z0-9_.\-]*)["']?\s*[:=]\s*(.*?)\s*,?\s*$"#)
                .unwrap(),
            Regex::new(r#"add_argument\(\s*["']--([A-Za-z0-9_\-]+)["'][^)]*?default\s*=\s*([^,)]+)"#)
                .unwrap(),
            Regex::new(r#"--([A-Za-z0-9_\-]+)(?:=|\s+)([^\s-][^\s]*)"#).unwrap(),
        )
    })
}

fn clean_key(k: &str) -> String {
    k.rsplit('.').next().unwrap_or(k).replace('-', "_").to_ascii_lowercase()
}

fn clean_value(v: &str) -> Option<String> {
    let v = v.trim().trim_end_matches(',').trim();
    let v = v.trim_matches(|c| c == '"' || c == '\'');
    if v.is_empty() || v.starts_with('{') || v.starts_with('[') || v == "None" || v == "null" {
        return None;
    }
    Some(v.to_string())
}

/// Key/value facts gathered from observations; first occurrence wins.
#[derive(Debug, Default, Clone)]
struct Facts {
    kv: BTreeMap<String, String>,
    order: Vec<String>,
}

impl Facts {
    fn put(&mut self, k: &str, v: &str) {
        let k = clean_key(k);
        if let Some(v) = clean_value(v) {
            if !self.kv.contains_key(&k) {
                self.order.push(k.clone());
                self.kv.insert(k, v);
            }
        }
    }

    fn absorb_command(&mut self, cmd: &str) {
        let (_, _, flag) = kv_patterns();
        for c in flag.captures_iter(cmd) {
            self.put(&c[1], &c[2]);
        }
    }

    fn absorb_file(&mut self, text: &str) {
        let (line_kv, argparse, flag) = kv_patterns();
        for line in text.lines() {
            if let Some(c) = argparse.captures(line) {
                self.put(&c[1], &c[2]);
            } else if let Some(c) = line_kv.captures(line) {
                self.put(&c[1], &c[2]);
            } else {
                for c in flag.captures_iter(line) {
                    self.put(&c[1], &c[2]);
                }
            }
        }
    }

    fn from_text(text: &str) -> Self {
        let mut f = Facts::default();
        f.absorb_file(text);
        f
    }

    fn first(&self, keys: &[&str]) -> Option<&String> {
        keys.iter().find_map(|k| self.kv.get(*k))
    }

    fn iters(&self) -> Option<(u64, &'static str)> {
        for (k, kind) in ITER_KEYS {
            if let Some(v) = self.kv.get(k) {
                if let Ok(n) = v.replace('_', "").parse::<u64>() {
                    if n > 0 {
                        return Some((n, kind));
                    }
                }
            }
        }
        None
    }

    fn missing(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.first(&MODEL_KEYS).is_none() {
            out.push("model_name");
        }
        if self.first(&TASK_KEYS).is_none() {
            out.push("task_type");
        }
        if self.iters().is_none() {
            out.push("iters");
        }
        if self.first(&TRAIN_KEYS).is_none() {
            out.push("train");
        }
        if self.first(&VALID_KEYS).is_none() {
            out.push("valid");
        }
        out
    }

    fn extras(&self, keys: &[&str]) -> Map<String, Value> {
        let mut m = Map::new();
        for k in keys {
            if let Some(v) = self.kv.get(*k) {
                m.insert((*k).to_string(), scalar(v));
            }
        }
        m
    }

    fn document(&self) -> Option<Value> {
        if !self.missing().is_empty() {
            return None;
        }
        let (iters, kind) = self.iters()?;
        let iter_type = match self.kv.get("iter_type") {
            Some(t) => t.clone(),
            None => kind.to_string(),
        };
        let mut model = self.extras(&MODEL_EXTRAS);
        model.insert("model_name".into(), Value::from(self.first(&MODEL_KEYS)?.clone()));
        model.insert("task_type".into(), Value::from(self.first(&TASK_KEYS)?.clone()));
        let mut training = self.extras(&TRAINING_EXTRAS);
        training.insert("iters".into(), Value::from(iters));
        training.insert("iter_type".into(), Value::from(iter_type));
        let mut dataset = self.extras(&DATASET_EXTRAS);
        dataset.insert("train".into(), Value::from(self.first(&TRAIN_KEYS)?.clone()));
        dataset.insert("valid".into(), Value::from(self.first(&VALID_KEYS)?.clone()));
        Some(json!({
            "model_config": model,
            "training_config": training,
            "dataset_config": dataset,
        }))
    }
}

fn scalar(v: &str) -> Value {
    if let Ok(i) = v.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(f) = v.parse::<f64>() {
        if f.is_finite() {
            return Value::from(f);
        }
    }
    match v {
        "true" | "True" => Value::Bool(true),
        "false" | "False" => Value::Bool(false),
        _ => Value::from(v),
    }
}

/// One parsed turn of an agent transcript.
struct Turn {
    action: String,
    input: String,
    observation: String,
}

struct Transcript {
    command: String,
    turns: Vec<Turn>,
}

/// Marker the agent writes after each observation.
pub const OBSERVATION_END: &str = "[end of observation]";

fn parse_transcript(text: &str) -> Transcript {
    let mut command = String::new();
    let mut turns = Vec::new();
    let mut action = String::new();
    let mut input = String::new();
    let mut obs: Option<String> = None;
    for line in text.lines() {
        if let Some(buf) = obs.as_mut() {
            if line.trim() == OBSERVATION_END {
                turns.push(Turn {
                    action: std::mem::take(&mut action),
                    input: std::mem::take(&mut input),
                    observation: obs.take().unwrap_or_default(),
                });
            } else {
                buf.push_str(line);
                buf.push('\n');
            }
            continue;
        }
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix("Training command:") {
            command = rest.trim().to_string();
        } else if let Some(rest) = t.strip_prefix("Action Input:") {
            input = rest.trim().to_string();
        } else if let Some(rest) = t.strip_prefix("Action:") {
            action = rest.trim().to_ascii_lowercase();
        } else if t.starts_with("Observation:") {
            obs = Some(String::new());
        }
    }
    Transcript { command, turns }
}

fn file_rank(path: &str) -> u8 {
    let ext = path.rsplit('.').next().unwrap_or("");
    match ext {
        "yaml" | "yml" | "json" | "toml" => 0,
        "py" => 1,
        "sh" => 2,
        "md" => 3,
        _ => 4,
    }
}

fn agent_turn(input: &str) -> String {
    let tr = parse_transcript(input);
    let mut facts = Facts::default();
    facts.absorb_command(&tr.command);
    let mut listing: Vec<String> = Vec::new();
    let mut read: Vec<String> = Vec::new();
    for t in &tr.turns {
        match t.action.as_str() {
            "file_tree" => {
                listing = t
                    .observation
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.ends_with('/') && !l.starts_with('['))
                    .map(str::to_string)
                    .collect();
            }
            "file_read" => {
                read.push(t.input.clone());
                facts.absorb_file(&t.observation);
            }
            _ => {}
        }
    }

    if facts.missing().is_empty() {
        let doc = facts.document().expect("complete facts form a document");
        return format!(
            "Thought: All mandatory fields are known.\nAction: finish\nAction Input: {doc}"
        );
    }
    if tr.turns.is_empty() || listing.is_empty() {
        return "Thought: I need to see the repository layout first.\nAction: file_tree\nAction Input: .".into();
    }
    let in_command: Vec<&String> = listing
        .iter()
        .filter(|p| tr.command.split_whitespace().any(|tok| tok.trim_start_matches("./") == p.as_str()))
        .collect();
    let mut candidates: Vec<&String> = in_command;
    let mut rest: Vec<&String> = listing.iter().filter(|p| !candidates.contains(p)).collect();
    rest.sort_by_key(|p| file_rank(p));
    candidates.extend(rest);
    match candidates.into_iter().find(|p| !read.contains(p)) {
        Some(next) => format!(
            "Thought: Still missing {}; {next} may define them.\nAction: file_read\nAction Input: {next}",
            facts.missing().join(", ")
        ),
        None => format!(
            "Thought: Still missing {}; listing the tree again.\nAction: file_tree\nAction Input: .",
            facts.missing().join(", ")
        ),
    }
}
