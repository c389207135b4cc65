use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvisorConfig {
    /// Minimum cosine score for a historical job to count as a match.
    pub similarity_threshold: f64,
    pub top_k: usize,
}

impl Default for AdvisorConfig {
    fn default() -> Self {
        AdvisorConfig {
            similarity_threshold: 0.80,
            top_k: 3,
        }
    }
}

impl AdvisorConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(ModelError::Invalid(
                "advisor.similarity_threshold must be in [0,1]".into(),
            ));
        }
        if self.top_k == 0 {
            return Err(ModelError::Invalid("advisor.top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Descriptive texts embedded once to form the log-line category vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CategoryLabels {
    pub progress: String,
    pub init: String,
    pub warning: String,
    pub error: String,
    pub misc: String,
}

impl Default for CategoryLabels {
    fn default() -> Self {
        CategoryLabels {
            progress: "training progress report: iteration step loss lr step time \
                       throughput samples per second elapsed eta grad norm epoch it"
                .into(),
            init: "initializing setup loading building model tokenizer distributed \
                   process group world size backend config arguments"
                .into(),
            warning: "warning deprecated deprecation userwarning futurewarning \
                      consider instead recommended ignored"
                .into(),
            error: "error exception traceback failed failure fatal aborted crashed \
                    killed timeout exited nccl cuda xid ecc segmentation fault"
                .into(),
            misc: "miscellaneous output debug dump payload record row column \
                   value sample input ids text field"
                .into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Stop after this many successful metric extractions.
    pub max_metric_lines: usize,
    /// Median-absolute-deviation multiplier for outlier removal.
    pub outlier_mad_k: f64,
    /// Post-pack steps required before the eviction check is trusted.
    pub min_steps_after_pack: u64,
    pub category_labels: CategoryLabels,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            max_metric_lines: 8,
            outlier_mad_k: 3.0,
            min_steps_after_pack: 30,
            category_labels: CategoryLabels::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.max_metric_lines == 0 {
            return Err(ModelError::Invalid(
                "tracker.max_metric_lines must be >= 1".into(),
            ));
        }
        if !(self.outlier_mad_k > 0.0) {
            return Err(ModelError::Invalid("tracker.outlier_mad_k must be > 0".into()));
        }
        if self.min_steps_after_pack == 0 {
            return Err(ModelError::Invalid(
                "tracker.min_steps_after_pack must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriageConfig {
    pub chunk_lines: usize,
    /// Lines handed to the classifier around the located failure.
    pub context_window_lines: usize,
    /// Tail window used when no failure line could be located.
    pub baseline_tail_lines: usize,
}

impl Default for TriageConfig {
    fn default() -> Self {
        TriageConfig {
            chunk_lines: 64,
            context_window_lines: 200,
            baseline_tail_lines: 500,
        }
    }
}

impl TriageConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.chunk_lines == 0 {
            return Err(ModelError::Invalid("triage.chunk_lines must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackingConfig {
    /// Evict when throughput after packing over throughput before drops below this.
    pub slowdown_rate_threshold: f64,
    /// Packing is allowed while the pair's utilizations sum to at most this.
    pub pack_util_cap: f64,
    pub no_repack_evicted: bool,
}

impl Default for PackingConfig {
    fn default() -> Self {
        PackingConfig {
            slowdown_rate_threshold: 0.5,
            pack_util_cap: 80.0,
            no_repack_evicted: true,
        }
    }
}

impl PackingConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.slowdown_rate_threshold > 0.0 && self.slowdown_rate_threshold < 1.0) {
            return Err(ModelError::Invalid(
                "packing.slowdown_rate_threshold must be in (0,1)".into(),
            ));
        }
        if !(0.0..=200.0).contains(&self.pack_util_cap) {
            return Err(ModelError::Invalid(
                "packing.pack_util_cap must be in [0,200]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub profiling_seconds: u64,
    pub checkpoint_interval_s: u64,
    /// Human triage delay before a failed job is resubmitted.
    pub manual_recovery_delay_s: u64,
    /// Automated recovery: diagnostic run.
    pub diagnostic_s: u64,
    /// Automated recovery: replacement node provisioning.
    pub provision_s: u64,
    /// Fraction of jobs whose logs expose step times.
    pub detection_rate: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            profiling_seconds: 100,
            checkpoint_interval_s: 1800,
            manual_recovery_delay_s: 7200,
            diagnostic_s: 120,
            provision_s: 300,
            detection_rate: 1.0,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn recovery_delay_s(&self) -> u64 {
        self.diagnostic_s + self.provision_s
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.detection_rate) {
            return Err(ModelError::Invalid("sim.detection_rate must be in [0,1]".into()));
        }
        if self.checkpoint_interval_s == 0 {
            return Err(ModelError::Invalid(
                "sim.checkpoint_interval_s must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Knobs specific to individual scheduling policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// GPU-seconds of attained service after which a job drops to the low queue.
    pub las_promotion_gpu_s: u64,
    /// Duration used by the history-mean estimator when no history exists.
    pub qssf_default_duration_s: u64,
    /// Log-space spread of the noisy learned-estimator baseline.
    pub lucid_noise_sigma: f64,
    /// Fraction of baseline estimates that land within 100% relative error.
    pub lucid_within_2x: f64,
    /// Record finished jobs into the history store during simulation.
    pub learn_online: bool,
    /// Store snapshot to seed the history with.
    pub history_snapshot: Option<PathBuf>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            las_promotion_gpu_s: 3200,
            qssf_default_duration_s: 3600,
            lucid_noise_sigma: 1.5,
            lucid_within_2x: 0.277,
            learn_online: true,
            history_snapshot: None,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lucid_within_2x > 0.0 && self.lucid_within_2x < 1.0) {
            return Err(ModelError::Invalid("policy.lucid_within_2x must be in (0,1)".into()));
        }
        if !(self.lucid_noise_sigma > 0.0) {
            return Err(ModelError::Invalid("policy.lucid_noise_sigma must be > 0".into()));
        }
        Ok(())
    }
}

/// Whole configuration document, one section per module.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub advisor: AdvisorConfig,
    pub tracker: TrackerConfig,
    pub triage: TriageConfig,
    pub packing: PackingConfig,
    pub sim: SimConfig,
    pub policy: PolicyConfig,
}

impl Config {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.advisor.validate()?;
        self.tracker.validate()?;
        self.triage.validate()?;
        self.packing.validate()?;
        self.sim.validate()?;
        self.policy.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| ModelError::Invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
