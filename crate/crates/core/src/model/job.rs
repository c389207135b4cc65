use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Terminal state of a job as recorded in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FinalStatus {
    Completed,
    Failed,
    Canceled,
}

impl FinalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FinalStatus::Completed => "COMPLETED",
            FinalStatus::Failed => "FAILED",
            FinalStatus::Canceled => "CANCELED",
        }
    }
}

impl fmt::Display for FinalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FinalStatus {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "COMPLETED" => Ok(FinalStatus::Completed),
            "FAILED" => Ok(FinalStatus::Failed),
            "CANCELED" | "CANCELLED" => Ok(FinalStatus::Canceled),
            other => Err(ModelError::Invalid(format!("unknown final status `{other}`"))),
        }
    }
}

/// Coarse root-cause class of a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCategory {
    Infra,
    Framework,
    UserScript,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 3] = [
        ErrorCategory::Infra,
        ErrorCategory::Framework,
        ErrorCategory::UserScript,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCategory::Infra => "INFRA",
            ErrorCategory::Framework => "FRAMEWORK",
            ErrorCategory::UserScript => "USER_SCRIPT",
        }
    }
}

impl FromStr for ErrorCategory {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "INFRA" => Ok(ErrorCategory::Infra),
            "FRAMEWORK" => Ok(ErrorCategory::Framework),
            "USER_SCRIPT" => Ok(ErrorCategory::UserScript),
            other => Err(ModelError::Invalid(format!("unknown error category `{other}`"))),
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hardware or fabric element blamed for an infrastructure failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Component {
    Gpu,
    Nvlink,
    Node,
    Network,
    None,
}

impl Component {
    pub const HARDWARE: [Component; 4] = [
        Component::Gpu,
        Component::Nvlink,
        Component::Node,
        Component::Network,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Component::Gpu => "GPU",
            Component::Nvlink => "NVLINK",
            Component::Node => "NODE",
            Component::Network => "NETWORK",
            Component::None => "NONE",
        }
    }
}

impl FromStr for Component {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "GPU" => Ok(Component::Gpu),
            "NVLINK" => Ok(Component::Nvlink),
            "NODE" => Ok(Component::Node),
            "NETWORK" => Ok(Component::Network),
            "NONE" | "" => Ok(Component::None),
            other => Err(ModelError::Invalid(format!("unknown component `{other}`"))),
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A failure cause. Only infrastructure failures name a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureKind {
    pub category: ErrorCategory,
    pub component: Component,
}

impl FailureKind {
    pub fn new(category: ErrorCategory, component: Component) -> Result<Self, ModelError> {
        let infra = category == ErrorCategory::Infra;
        if infra != (component != Component::None) {
            return Err(ModelError::Invalid(format!(
                "failure kind {category}/{component}: a component is named iff the category is INFRA"
            )));
        }
        Ok(FailureKind {
            category,
            component,
        })
    }

    pub fn infra(component: Component) -> Self {
        assert!(component != Component::None, "infra failures name a component");
        FailureKind {
            category: ErrorCategory::Infra,
            component,
        }
    }

    pub fn framework() -> Self {
        FailureKind {
            category: ErrorCategory::Framework,
            component: Component::None,
        }
    }

    pub fn user_script() -> Self {
        FailureKind {
            category: ErrorCategory::UserScript,
            component: Component::None,
        }
    }

    pub fn is_infra(&self) -> bool {
        self.category == ErrorCategory::Infra
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.category, self.component)
    }
}

impl FromStr for FailureKind {
    type Err = ModelError;

    /// Parses `CATEGORY/COMPONENT`, e.g. `INFRA/GPU` or `USER_SCRIPT/NONE`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (cat, comp) = s.split_once('/').unwrap_or((s, "NONE"));
        FailureKind::new(cat.parse()?, comp.parse()?)
    }
}

/// Static request of a job as submitted to the cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub job_id: String,
    pub user: String,
    pub job_name: String,
    pub submit_time: u64,
    pub num_gpus: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workdir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub launch_command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata_path: Option<PathBuf>,
}

impl JobSpec {
    pub fn new(job_id: impl Into<String>, num_gpus: u32, submit_time: u64) -> Self {
        JobSpec {
            job_id: job_id.into(),
            user: String::new(),
            job_name: String::new(),
            submit_time,
            num_gpus,
            workdir: None,
            launch_command: None,
            log_path: None,
            metadata_path: None,
        }
    }
}

/// Exclusive step time assumed when a trace does not carry one.
pub const DEFAULT_STEP_TIME_S: f64 = 1.0;

/// Retention used for co-runner buckets missing from a slowdown table.
pub const DEFAULT_RETENTION: f64 = 1.0;

/// Decade bucket (0..=9) of a co-runner's SM utilization.
pub fn util_bucket(util: f64) -> u8 {
    (util.clamp(0.0, 100.0) / 10.0).floor().min(9.0) as u8
}

/// Ground-truth dynamics of a job, known to the simulator but not to schedulers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobTruth {
    pub true_duration: u64,
    pub final_status: FinalStatus,
    pub sm_util_steady: f64,
    pub sm_util_warmup: f64,
    pub warmup_seconds: u64,
    pub logs_progress: bool,
    #[serde(default)]
    pub failure_events: Vec<(u64, FailureKind)>,
    /// Co-runner utilization decade (0..=9) to throughput retention in (0, 1].
    #[serde(default)]
    pub pack_slowdown_table: BTreeMap<u8, f64>,
    #[serde(default = "default_step_time")]
    pub step_time_s: f64,
}

fn default_step_time() -> f64 {
    DEFAULT_STEP_TIME_S
}

impl JobTruth {
    pub fn simple(true_duration: u64, sm_util_steady: f64) -> Self {
        JobTruth {
            true_duration,
            final_status: FinalStatus::Completed,
            sm_util_steady,
            sm_util_warmup: sm_util_steady,
            warmup_seconds: 0,
            logs_progress: true,
            failure_events: Vec::new(),
            pack_slowdown_table: BTreeMap::new(),
            step_time_s: DEFAULT_STEP_TIME_S,
        }
    }

    /// Throughput retention when co-located with a job of the given steady utilization.
    pub fn retention_against(&self, co_runner_util: f64) -> f64 {
        self.pack_slowdown_table
            .get(&util_bucket(co_runner_util))
            .copied()
            .unwrap_or(DEFAULT_RETENTION)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.true_duration == 0 {
            return Err(ModelError::Invalid("true_duration must be > 0".into()));
        }
        if self.warmup_seconds >= self.true_duration {
            return Err(ModelError::Invalid(
                "warmup_seconds must be < true_duration".into(),
            ));
        }
        for (name, u) in [
            ("sm_util_steady", self.sm_util_steady),
            ("sm_util_warmup", self.sm_util_warmup),
        ] {
            if !(0.0..=100.0).contains(&u) {
                return Err(ModelError::Invalid(format!("{name} {u} outside [0,100]")));
            }
        }
        for (offset, _) in &self.failure_events {
            if *offset >= self.true_duration {
                return Err(ModelError::Invalid(format!(
                    "failure offset {offset} is not < true_duration {}",
                    self.true_duration
                )));
            }
        }
        for (bucket, r) in &self.pack_slowdown_table {
            if *bucket > 9 {
                return Err(ModelError::Invalid(format!("slowdown bucket {bucket} > 9")));
            }
            if !(*r > 0.0 && *r <= 1.0) {
                return Err(ModelError::Invalid(format!(
                    "retention {r} for bucket {bucket} outside (0,1]"
                )));
            }
        }
        if !(self.step_time_s > 0.0) {
            return Err(ModelError::Invalid("step_time must be > 0".into()));
        }
        Ok(())
    }
}

/// One trace row: request plus ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub spec: JobSpec,
    pub truth: JobTruth,
}

impl TraceRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.spec.job_id.is_empty() {
            return Err(ModelError::Invalid("empty job_id".into()));
        }
        if self.spec.num_gpus == 0 {
            return Err(ModelError::Invalid("num_gpus must be >= 1".into()));
        }
        self.truth.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_kind_component_iff_infra() {
        assert!(FailureKind::new(ErrorCategory::Infra, Component::None).is_err());
        assert!(FailureKind::new(ErrorCategory::UserScript, Component::Gpu).is_err());
        assert!(FailureKind::new(ErrorCategory::Infra, Component::Nvlink).is_ok());
        assert_eq!(
            "INFRA/GPU".parse::<FailureKind>().unwrap(),
            FailureKind::infra(Component::Gpu)
        );
        assert_eq!(
            "USER_SCRIPT".parse::<FailureKind>().unwrap(),
            FailureKind::user_script()
        );
    }

    #[test]
    fn buckets_are_decades() {
        assert_eq!(util_bucket(0.0), 0);
        assert_eq!(util_bucket(9.99), 0);
        assert_eq!(util_bucket(10.0), 1);
        assert_eq!(util_bucket(85.0), 8);
        assert_eq!(util_bucket(100.0), 9);
    }

    #[test]
    fn unlisted_bucket_retains_full_speed() {
        let mut t = JobTruth::simple(100, 50.0);
        t.pack_slowdown_table.insert(8, 0.4);
        assert_eq!(t.retention_against(85.0), 0.4);
        assert_eq!(t.retention_against(20.0), 1.0);
    }

    #[test]
    fn truth_invariants() {
        let mut t = JobTruth::simple(100, 50.0);
        assert!(t.validate().is_ok());
        t.warmup_seconds = 100;
        assert!(t.validate().is_err());
        t.warmup_seconds = 0;
        t.failure_events.push((100, FailureKind::framework()));
        assert!(t.validate().is_err());
        t.failure_events.clear();
        t.pack_slowdown_table.insert(3, 0.0);
        assert!(t.validate().is_err());
    }
}
