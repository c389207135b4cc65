//! Synthetic traces built from recurring job families.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CorpusError;
use crate::model::{
    write_trace_file, Component, FailureKind, FinalStatus, JobSpec, JobTruth, TraceRecord,
    WorkloadMetadata,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSpec {
    pub num_jobs: usize,
    pub num_families: usize,
    pub duration_median_s: f64,
    /// Log-space spread of family base durations.
    pub duration_sigma: f64,
    /// Log-space spread of durations within a family.
    pub family_noise: f64,
    pub mean_interarrival_s: f64,
    pub gpu_choices: Vec<u32>,
    pub early_exit_fraction: f64,
    pub infra_fraction: f64,
    /// Fraction of families with high steady utilization.
    pub heavy_fraction: f64,
    /// Fraction of heavy families whose warmup utilization is low.
    pub warmup_bias_fraction: f64,
    pub warmup_s: (u64, u64),
    /// Retention range when two heavy jobs share a GPU.
    pub heavy_retention: (f64, f64),
    pub logs_progress_fraction: f64,
    pub with_metadata: bool,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec {
            num_jobs: 100,
            num_families: 20,
            duration_median_s: 120.0,
            duration_sigma: 1.5,
            family_noise: 0.1,
            mean_interarrival_s: 60.0,
            gpu_choices: vec![1, 1, 1, 2, 4, 8],
            early_exit_fraction: 0.1,
            infra_fraction: 0.05,
            heavy_fraction: 0.4,
            warmup_bias_fraction: 0.5,
            warmup_s: (30, 300),
            heavy_retention: (0.25, 0.45),
            logs_progress_fraction: 0.9,
            with_metadata: true,
        }
    }
}

impl TraceSpec {
    /// Every job is compute-heavy and looks light while warming up.
    pub fn heavy_interference() -> Self {
        TraceSpec {
            num_jobs: 120,
            num_families: 30,
            duration_median_s: 1800.0,
            duration_sigma: 0.6,
            mean_interarrival_s: 150.0,
            gpu_choices: vec![1],
            early_exit_fraction: 0.0,
            infra_fraction: 0.0,
            heavy_fraction: 1.0,
            warmup_bias_fraction: 1.0,
            warmup_s: (300, 600),
            logs_progress_fraction: 1.0,
            with_metadata: false,
            ..TraceSpec::default()
        }
    }

    /// A large share of jobs hit an infrastructure fault mid-run.
    pub fn infra_heavy() -> Self {
        TraceSpec {
            num_jobs: 80,
            num_families: 16,
            duration_median_s: 3600.0,
            duration_sigma: 0.5,
            mean_interarrival_s: 300.0,
            gpu_choices: vec![1, 1, 2, 4],
            early_exit_fraction: 0.05,
            infra_fraction: 0.3,
            ..TraceSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let frac = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(CorpusError::Spec(format!("{name} must be in [0,1]")))
            }
        };
        frac("early_exit_fraction", self.early_exit_fraction)?;
        frac("infra_fraction", self.infra_fraction)?;
        frac("heavy_fraction", self.heavy_fraction)?;
        frac("warmup_bias_fraction", self.warmup_bias_fraction)?;
        frac("logs_progress_fraction", self.logs_progress_fraction)?;
        if self.early_exit_fraction + self.infra_fraction > 1.0 {
            return Err(CorpusError::Spec("early exits and infra failures exceed the job count".into()));
        }
        if self.num_jobs == 0 || self.num_families == 0 {
            return Err(CorpusError::Spec("need at least one job and one family".into()));
        }
        if self.gpu_choices.is_empty() || self.gpu_choices.contains(&0) {
            return Err(CorpusError::Spec("gpu_choices must be non-empty and positive".into()));
        }
        if !(self.duration_median_s >= 1.0) || self.duration_sigma < 0.0 || self.family_noise < 0.0 {
            return Err(CorpusError::Spec("duration parameters out of range".into()));
        }
        if self.warmup_s.0 > self.warmup_s.1 {
            return Err(CorpusError::Spec("warmup_s range is empty".into()));
        }
        let (a, b) = self.heavy_retention;
        if !(a > 0.0 && a <= b && b <= 1.0) {
            return Err(CorpusError::Spec("heavy_retention must satisfy 0 < lo <= hi <= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub name: String,
    pub user: String,
    pub metadata: WorkloadMetadata,
    pub base_duration: f64,
    pub num_gpus: u32,
    pub heavy: bool,
    pub sm_util_steady: f64,
    pub sm_util_warmup: f64,
    pub warmup_s: u64,
    pub step_time_s: f64,
    pub slowdown: BTreeMap<u8, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrace {
    pub records: Vec<TraceRecord>,
    pub families: Vec<Family>,
    /// Family index of each record.
    pub family_of: Vec<usize>,
}

const MODEL_NAMES: [&str; 16] = [
    "GPT", "BERT", "LLaMA", "ResNet", "ViT", "T5", "UNet", "Mixtral", "Whisper", "CLIP", "DeiT",
    "RoBERTa", "OPT", "Falcon", "YOLO", "Swin",
];
const TASKS: [&str; 4] = ["NLP", "CV", "SPEECH", "MULTIMODAL"];
const DATASETS: [&str; 16] = [
    "pile", "c4", "wikitext", "imagenet", "coco", "librispeech", "laion", "openwebtext", "cifar",
    "ade20k", "squad", "redpajama", "kinetics", "voc", "mnli", "slimpajama",
];

fn family_metadata<R: Rng + ?Sized>(rng: &mut R, idx: usize) -> WorkloadMetadata {
    let model = MODEL_NAMES[idx % MODEL_NAMES.len()];
    let data = DATASETS[(idx * 7 + idx / MODEL_NAMES.len()) % DATASETS.len()];
    let epochs = rng.random_bool(0.25);
    let iters = if epochs {
        rng.random_range(1..=300)
    } else {
        rng.random_range(1..=500) * 1000
    };
    let mut md = WorkloadMetadata::new(
        &format!("{model}-v{}", idx / MODEL_NAMES.len() + 1),
        TASKS.choose(rng).unwrap(),
        iters,
        if epochs { "epoch" } else { "step" },
        &format!("{data}-train-{idx}"),
        &format!("{data}-valid-{idx}"),
    );
    md.model_config.extras.insert("d_model".into(), Value::from(*[512, 768, 1024, 2048, 4096].choose(rng).unwrap()));
    md.model_config.extras.insert("n_layer".into(), Value::from(rng.random_range(4..=48)));
    md.training_config.extras.insert("batch_size".into(), Value::from(*[8, 16, 32, 64, 128, 256].choose(rng).unwrap()));
    md.training_config.extras.insert("lr".into(), Value::from(*[1e-4, 3e-4, 5e-4, 1e-3].choose(rng).unwrap()));
    md.dataset_config.extras.insert("tokenizer".into(), Value::from(format!("{}-tok", model.to_lowercase())));
    md.canonicalized()
}

fn gen_family<R: Rng + ?Sized>(rng: &mut R, idx: usize, spec: &TraceSpec) -> Family {
    let metadata = family_metadata(rng, idx);
    let base = LogNormal::new(spec.duration_median_s.ln(), spec.duration_sigma)
        .expect("validated sigma")
        .sample(rng);
    let heavy = rng.random_bool(spec.heavy_fraction);
    let steady = if heavy {
        rng.random_range(70.0..95.0f64).round()
    } else {
        rng.random_range(10.0..45.0f64).round()
    };
    let biased = heavy && rng.random_bool(spec.warmup_bias_fraction);
    let warmup_util = if biased {
        rng.random_range(10.0..25.0f64).round()
    } else {
        steady
    };
    let mut slowdown = BTreeMap::new();
    for bucket in 0u8..=9 {
        let r = if heavy && bucket >= 5 {
            rng.random_range(spec.heavy_retention.0..=spec.heavy_retention.1)
        } else if heavy || bucket >= 5 {
            rng.random_range(0.75..0.95)
        } else {
            rng.random_range(0.9..1.0)
        };
        slowdown.insert(bucket, (r * 1000.0f64).round() / 1000.0);
    }
    Family {
        name: format!("fam{idx:03}"),
        user: format!("user{:02}", idx % 7),
        metadata,
        base_duration: base,
        num_gpus: *spec.gpu_choices.choose(rng).unwrap(),
        heavy,
        sm_util_steady: steady,
        sm_util_warmup: warmup_util,
        warmup_s: rng.random_range(spec.warmup_s.0..=spec.warmup_s.1),
        step_time_s: f64::from(rng.random_range(100u32..=2000)) / 1000.0,
        slowdown,
    }
}

pub fn gen_trace(spec: &TraceSpec, seed: u64) -> Result<GeneratedTrace, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families: Vec<Family> = (0..spec.num_families).map(|i| gen_family(&mut rng, i, spec)).collect();
    let noise = LogNormal::new(0.0, spec.family_noise.max(1e-12)).expect("validated noise");

    let n = spec.num_jobs;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_exit = (spec.early_exit_fraction * n as f64).round() as usize;
    let n_infra = ((spec.infra_fraction * n as f64).round() as usize).min(n - n_exit);
    let mut fate = vec![0u8; n];
    for &j in &order[..n_exit] {
        fate[j] = 1;
    }
    for &j in &order[n_exit..n_exit + n_infra] {
        fate[j] = 2;
    }

    let mut t = 0.0f64;
    let mut records = Vec::with_capacity(n);
    let mut family_of = Vec::with_capacity(n);
    for (j, &fate) in fate.iter().enumerate() {
        if j > 0 {
            t += -spec.mean_interarrival_s * (1.0 - rng.random::<f64>()).ln();
        }
        let fi = if j < families.len() { j } else { rng.random_range(0..families.len()) };
        let fam = &families[fi];
        let jitter = if spec.family_noise > 0.0 { noise.sample(&mut rng) } else { 1.0 };
        let full = ((fam.base_duration * jitter).round() as u64).max(2);

        let mut truth = JobTruth::simple(full, fam.sm_util_steady);
        truth.sm_util_warmup = fam.sm_util_warmup;
        truth.warmup_seconds = fam.warmup_s.min(full - 1);
        truth.logs_progress = rng.random_bool(spec.logs_progress_fraction);
        truth.pack_slowdown_table = fam.slowdown.clone();
        truth.step_time_s = fam.step_time_s;
        match fate {
            1 => {
                let cut = ((full as f64 * rng.random_range(0.05..0.5)).round() as u64).clamp(1, full - 1);
                if rng.random_bool(0.5) {
                    truth.true_duration = cut;
                    truth.warmup_seconds = truth.warmup_seconds.min(cut - 1);
                    truth.final_status = FinalStatus::Canceled;
                } else {
                    let kind = if rng.random_bool(0.5) {
                        FailureKind::user_script()
                    } else {
                        FailureKind::framework()
                    };
                    truth.failure_events.push((cut, kind));
                    truth.final_status = FinalStatus::Failed;
                }
            }
            2 => {
                let at = ((full as f64 * rng.random_range(0.1..0.9)).round() as u64).clamp(1, full - 1);
                let comp = *Component::HARDWARE.choose(&mut rng).unwrap();
                truth.failure_events.push((at, FailureKind::infra(comp)));
            }
            _ => {}
        }

        let mut job = JobSpec::new(format!("job{j:05}"), fam.num_gpus, t.round() as u64);
        job.user = fam.user.clone();
        job.job_name = fam.name.clone();
        if spec.with_metadata {
            job.metadata_path = Some(PathBuf::from(format!("metadata/{}.json", fam.name)));
        }
        records.push(TraceRecord { spec: job, truth });
        family_of.push(fi);
    }
    Ok(GeneratedTrace {
        records,
        families,
        family_of,
    })
}

impl GeneratedTrace {
    /// Writes `trace.csv` and, when referenced, `metadata/<family>.json`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CorpusError> {
        fs::create_dir_all(dir)?;
        if self.records.iter().any(|r| r.spec.metadata_path.is_some()) {
            fs::create_dir_all(dir.join("metadata"))?;
            for fam in &self.families {
                fs::write(
                    dir.join("metadata").join(format!("{}.json", fam.name)),
                    fam.metadata.to_json_pretty(),
                )?;
            }
        }
        let path = dir.join("trace.csv");
        write_trace_file(&self.records, &path).map_err(|e| CorpusError::Format(e.to_string()))?;
        Ok(path)
    }
}
