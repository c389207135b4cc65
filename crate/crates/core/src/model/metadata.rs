use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ModelError;

pub type Extras = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_name: String,
    pub task_type: String,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub iters: u64,
    pub iter_type: String,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub train: String,
    pub valid: String,
    #[serde(flatten)]
    pub extras: Extras,
}

/// Semantic fingerprint of a training workload, extracted from its source tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadMetadata {
    pub model_config: ModelConfig,
    pub training_config: TrainingConfig,
    pub dataset_config: DatasetConfig,
}

/// Mandatory fields, as dotted paths.
pub const MANDATORY_FIELDS: [&str; 6] = [
    "model_config.model_name",
    "model_config.task_type",
    "training_config.iters",
    "training_config.iter_type",
    "dataset_config.train",
    "dataset_config.valid",
];

impl WorkloadMetadata {
    pub fn new(
        model_name: &str,
        task_type: &str,
        iters: u64,
        iter_type: &str,
        train: &str,
        valid: &str,
    ) -> Self {
        WorkloadMetadata {
            model_config: ModelConfig {
                model_name: model_name.into(),
                task_type: task_type.into(),
                extras: Extras::new(),
            },
            training_config: TrainingConfig {
                iters,
                iter_type: iter_type.into(),
                extras: Extras::new(),
            },
            dataset_config: DatasetConfig {
                train: train.into(),
                valid: valid.into(),
                extras: Extras::new(),
            },
        }
    }

    /// Checks that every mandatory field is present and non-empty.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut missing = Vec::new();
        let strings = [
            (MANDATORY_FIELDS[0], &self.model_config.model_name),
            (MANDATORY_FIELDS[1], &self.model_config.task_type),
            (MANDATORY_FIELDS[3], &self.training_config.iter_type),
            (MANDATORY_FIELDS[4], &self.dataset_config.train),
            (MANDATORY_FIELDS[5], &self.dataset_config.valid),
        ];
        for (name, v) in strings {
            if v.trim().is_empty() {
                missing.push(name);
            }
        }
        if self.training_config.iters == 0 {
            missing.push(MANDATORY_FIELDS[2]);
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(format!(
                "metadata missing mandatory fields: {}",
                missing.join(", ")
            )))
        }
    }

    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let md: WorkloadMetadata = serde_json::from_str(text)
            .map_err(|e| ModelError::Invalid(format!("metadata document: {e}")))?;
        md.validate()?;
        Ok(md.canonicalized())
    }

    pub fn from_value(value: Value) -> Result<Self, ModelError> {
        let md: WorkloadMetadata = serde_json::from_value(value)
            .map_err(|e| ModelError::Invalid(format!("metadata document: {e}")))?;
        md.validate()?;
        Ok(md.canonicalized())
    }

    /// Trimmed strings, lowercase `iter_type`, uppercase `task_type`.
    pub fn canonicalized(mut self) -> Self {
        let m = &mut self.model_config;
        m.model_name = m.model_name.trim().to_string();
        m.task_type = m.task_type.trim().to_ascii_uppercase();
        let t = &mut self.training_config;
        t.iter_type = t.iter_type.trim().to_ascii_lowercase();
        let d = &mut self.dataset_config;
        d.train = d.train.trim().to_string();
        d.valid = d.valid.trim().to_string();
        self
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("metadata serializes")
    }

    /// Stable pretty JSON (keys sorted).
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("metadata serializes")
    }

    /// Text that gets embedded: every leaf value, ordered by sorted key path.
    ///
    /// Key names are left out; they are identical across all documents and
    /// would otherwise dominate a bag-of-tokens similarity.
    pub fn canonical_text(&self) -> String {
        let mut leaves = Vec::new();
        flatten("", &self.to_value(), &mut leaves);
        leaves.sort();
        leaves
            .into_iter()
            .map(|(_, v)| v)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&path, child, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i:04}]"), child, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => {}
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
