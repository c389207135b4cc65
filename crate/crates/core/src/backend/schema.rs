//! Expected reply shapes for completion requests and their validators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::model::WorkloadMetadata;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    /// `{"step": int?, "step_time_s": number > 0}`
    MetricLine,
    /// `{"error_type": INFRA|FRAMEWORK|USER_SCRIPT|UNKNOWN, "faulty_component": GPU|NVLINK|NODE|NETWORK|NONE}`
    FailureClass,
    /// `{"faulty_component": GPU|NVLINK|NODE|NETWORK}`
    FailureComponent,
    /// A workload metadata document.
    WorkloadMetadata,
    /// `Thought: / Action: / Action Input:` text.
    ReactStep,
}

impl SchemaId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemaId::MetricLine => "metric_line",
            SchemaId::FailureClass => "failure_class",
            SchemaId::FailureComponent => "failure_component",
            SchemaId::WorkloadMetadata => "workload_metadata",
            SchemaId::ReactStep => "react_step",
        }
    }

    /// Whether replies are JSON documents (as opposed to line protocol).
    pub fn is_json(&self) -> bool {
        !matches!(self, SchemaId::ReactStep)
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemaId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "metric_line" => SchemaId::MetricLine,
            "failure_class" => SchemaId::FailureClass,
            "failure_component" => SchemaId::FailureComponent,
            "workload_metadata" => SchemaId::WorkloadMetadata,
            "react_step" => SchemaId::ReactStep,
            other => return Err(format!("unknown schema `{other}`")),
        })
    }
}

const ERROR_TYPES: [&str; 4] = ["INFRA", "FRAMEWORK", "USER_SCRIPT", "UNKNOWN"];
const COMPONENTS: [&str; 5] = ["GPU", "NVLINK", "NODE", "NETWORK", "NONE"];

/// Parses `raw` against `schema`; `None` when it does not conform.
pub fn validate(schema: SchemaId, raw: &str) -> Option<Value> {
    match schema {
        SchemaId::ReactStep => parse_react(raw),
        _ => {
            let doc = extract_json(raw)?;
            check_json(schema, doc)
        }
    }
}

/// First `{` through last `}`, so code fences and chatter around the object are tolerated.
pub fn extract_json(raw: &str) -> Option<Value> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    if end < start {
        return None;
    }
    serde_json::from_str(&raw[start..=end]).ok()
}

fn upper_field(obj: &Map<String, Value>, key: &str) -> Option<String> {
    obj.get(key)?.as_str().map(|s| s.trim().to_ascii_uppercase())
}

fn check_json(schema: SchemaId, doc: Value) -> Option<Value> {
    let obj = doc.as_object()?;
    match schema {
        SchemaId::MetricLine => {
            let t = obj.get("step_time_s")?.as_f64()?;
            if !(t > 0.0 && t.is_finite()) {
                return None;
            }
            let step = match obj.get("step") {
                None | Some(Value::Null) => Value::Null,
                Some(v) => Value::from(v.as_u64()?),
            };
            Some(json!({"step": step, "step_time_s": t}))
        }
        SchemaId::FailureClass => {
            let et = upper_field(obj, "error_type")?;
            let comp = upper_field(obj, "faulty_component").unwrap_or_else(|| "NONE".into());
            if !ERROR_TYPES.contains(&et.as_str()) || !COMPONENTS.contains(&comp.as_str()) {
                return None;
            }
            Some(json!({"error_type": et, "faulty_component": comp}))
        }
        SchemaId::FailureComponent => {
            let comp = upper_field(obj, "faulty_component")?;
            if !COMPONENTS[..4].contains(&comp.as_str()) {
                return None;
            }
            Some(json!({ "faulty_component": comp }))
        }
        SchemaId::WorkloadMetadata => WorkloadMetadata::from_value(doc.clone())
            .ok()
            .map(|md| md.to_value()),
        SchemaId::ReactStep => unreachable!(),
    }
}

/// Parses one agent turn into `{"thought", "action", "action_input"}`.
///
/// `action` is normalized to `file_tree`, `file_read` or `finish`. Everything
/// after `Action Input:` (including following lines) is the input.
pub fn parse_react(raw: &str) -> Option<Value> {
    let mut thought = String::new();
    let mut action = None;
    let mut input: Option<String> = None;
    for line in raw.lines() {
        if let Some(buf) = input.as_mut() {
            buf.push('\n');
            buf.push_str(line);
            continue;
        }
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix("Thought:") {
            thought = rest.trim().to_string();
        } else if let Some(rest) = t.strip_prefix("Action Input:") {
            input = Some(rest.trim().to_string());
        } else if let Some(rest) = t.strip_prefix("Action:") {
            action = Some(normalize_action(rest.trim())?);
        } else if t.starts_with("Observation:") {
            // A model inventing its own observation ends the turn.
            break;
        }
    }
    let action = action?;
    let input = input?.trim().to_string();
    Some(json!({"thought": thought, "action": action, "action_input": input}))
}

fn normalize_action(name: &str) -> Option<&'static str> {
    match name
        .trim_matches(|c: char| c == '`' || c == '"')
        .to_ascii_lowercase()
        .as_str()
    {
        "file_tree" | "file_tree_tool" => Some("file_tree"),
        "file_read" | "file_read_tool" => Some("file_read"),
        "finish" | "final_answer" => Some("finish"),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_line_shapes() {
        assert_eq!(
            validate(SchemaId::MetricLine, r#"{"step": 40, "step_time_s": 0.52}"#),
            Some(json!({"step": 40, "step_time_s": 0.52}))
        );
        assert!(validate(SchemaId::MetricLine, r#"{"step": 40}"#).is_none());
        assert!(validate(SchemaId::MetricLine, r#"{"step_time_s": -1}"#).is_none());
        assert!(validate(SchemaId::MetricLine, "no metric here").is_none());
        let fenced = "```json\n{\"step_time_s\": 1.5}\n```";
        assert_eq!(
            validate(SchemaId::MetricLine, fenced).unwrap()["step_time_s"],
            1.5
        );
    }

    #[test]
    fn failure_class_enums() {
        let v = validate(
            SchemaId::FailureClass,
            r#"{"error_type": "infra", "faulty_component": "network"}"#,
        )
        .unwrap();
        assert_eq!(v["error_type"], "INFRA");
        assert_eq!(v["faulty_component"], "NETWORK");
        assert!(validate(SchemaId::FailureClass, r#"{"error_type": "COSMIC_RAY"}"#).is_none());
        assert!(validate(SchemaId::FailureComponent, r#"{"faulty_component": "NONE"}"#).is_none());
    }

    #[test]
    fn react_protocol() {
        let v = parse_react("Thought: look around\nAction: file_tree\nAction Input: .").unwrap();
        assert_eq!(v["action"], "file_tree");
        assert_eq!(v["action_input"], ".");
        let v = parse_react("Thought: done\nAction: FINISH\nAction Input: {\n\"a\": 1\n}").unwrap();
        assert_eq!(v["action"], "finish");
        assert_eq!(v["action_input"], "{\n\"a\": 1\n}");
        assert!(parse_react("I think the answer is 42").is_none());
        assert!(parse_react("Action: rm_rf\nAction Input: /").is_none());
    }
}
