//! Line templates for synthetic logs.

use std::collections::HashSet;
use std::sync::OnceLock;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::backend::embed::tokenize;
use crate::backend::HashingEmbedder;
use crate::model::{CategoryLabels, Component, ErrorCategory, FailureKind};
use crate::tracker::{label_text, Category};

/// Hash buckets used by the default category labels.
fn label_buckets() -> &'static HashSet<usize> {
    static B: OnceLock<HashSet<usize>> = OnceLock::new();
    B.get_or_init(|| {
        let e = HashingEmbedder::default();
        let labels = CategoryLabels::default();
        Category::ALL
            .iter()
            .flat_map(|c| tokenize(label_text(&labels, *c)).collect::<Vec<_>>())
            .map(|t| e.bucket(&t))
            .collect()
    })
}

/// Integers whose decimal token shares no hash bucket with any category label.
///
/// Numbers in generated lines are drawn from here so that they cannot nudge
/// the classifier toward an unintended category.
pub fn neutral_numbers() -> &'static [u32] {
    static N: OnceLock<Vec<u32>> = OnceLock::new();
    N.get_or_init(|| {
        let e = HashingEmbedder::default();
        let used = label_buckets();
        (0..100_000u32)
            .filter(|n| !used.contains(&e.bucket(&n.to_string())))
            .collect()
    })
}

/// A neutral number in `[lo, hi)`, or the nearest neutral number above `lo`.
pub fn num<R: Rng + ?Sized>(rng: &mut R, lo: u32, hi: u32) -> u32 {
    let pool = neutral_numbers();
    let a = pool.partition_point(|&n| n < lo);
    let b = pool.partition_point(|&n| n < hi).max(a + 1).min(pool.len());
    pool[rng.random_range(a..b)]
}

/// `rankN` tag whose token is neutral.
fn rank_tag<R: Rng + ?Sized>(rng: &mut R) -> String {
    static R: OnceLock<Vec<String>> = OnceLock::new();
    let pool = R.get_or_init(|| {
        let e = HashingEmbedder::default();
        let used = label_buckets();
        (0..64)
            .map(|n| format!("rank{n}"))
            .filter(|t| !used.contains(&e.bucket(t)))
            .collect()
    });
    pool.choose(rng).unwrap().clone()
}

const MODELS: [&str; 8] = ["gpt", "bert", "llama", "resnet", "vit", "t5", "unet", "mixtral"];
const APIS: [&str; 6] = [
    "torch.cuda.amp.GradScaler",
    "torch.utils.data.dataloader",
    "transformers.AdamW",
    "torch.distributed.launch",
    "deepspeed.initialize",
    "apex.amp",
];
const WORDS: [&str; 12] = [
    "alpha", "bravo", "charlie", "oscar", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima",
];

pub fn init_line<R: Rng + ?Sized>(rng: &mut R) -> String {
    match rng.random_range(0..5) {
        0 => format!(
            "initializing distributed process group: backend=nccl world_size={} rank={}",
            num(rng, 1, 512),
            num(rng, 0, 64)
        ),
        1 => format!(
            "loading tokenizer from /data/tokenizers/{}-{}",
            MODELS.choose(rng).unwrap(),
            num(rng, 1, 100)
        ),
        2 => format!(
            "building model {} with {} layers and hidden size {}",
            MODELS.choose(rng).unwrap(),
            num(rng, 2, 96),
            num(rng, 256, 16384)
        ),
        3 => format!(
            "loading config arguments from /workspace/configs/{}.yaml",
            WORDS.choose(rng).unwrap()
        ),
        _ => format!("setup of data loader complete: {} workers per process", num(rng, 1, 32)),
    }
}

pub fn warning_line<R: Rng + ?Sized>(rng: &mut R) -> String {
    match rng.random_range(0..3) {
        0 => format!(
            "UserWarning: {} is deprecated, consider the new interface instead",
            APIS.choose(rng).unwrap()
        ),
        1 => format!(
            "FutureWarning: {} deprecation: the default will change in version {}",
            APIS.choose(rng).unwrap(),
            num(rng, 2, 9)
        ),
        _ => format!(
            "warning: option {} is ignored, recommended setting is {}",
            WORDS.choose(rng).unwrap(),
            num(rng, 1, 1000)
        ),
    }
}

/// Heavy-noise line (data dumps and debug output).
pub fn noise_line<R: Rng + ?Sized>(rng: &mut R) -> String {
    match rng.random_range(0..3) {
        0 => format!(
            "debug dump record {}: value={} field={} sample text {} {}",
            num(rng, 0, 100_000),
            num(rng, 0, 100_000),
            WORDS.choose(rng).unwrap(),
            WORDS.choose(rng).unwrap(),
            WORDS.choose(rng).unwrap()
        ),
        1 => format!(
            "input ids row {} column {} value {} payload {}",
            num(rng, 0, 4096),
            num(rng, 0, 4096),
            num(rng, 0, 50_000),
            WORDS.choose(rng).unwrap()
        ),
        _ => format!(
            "sample {} text field: {} {} {} {}",
            num(rng, 0, 100_000),
            WORDS.choose(rng).unwrap(),
            WORDS.choose(rng).unwrap(),
            num(rng, 0, 1000),
            WORDS.choose(rng).unwrap()
        ),
    }
}

/// Progress line formats seen in common training frameworks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgressStyle {
    /// `step 40 loss 2.1034 step_time 0.520s`
    Plain,
    /// Megatron-style `iteration 40/80000 | elapsed time per iteration (ms): 520.0 | ...`
    Megatron,
    /// tqdm-style `training epoch 1: 12%| 40/320 [00:21<02:25, 0.520s/it, loss=2.10]`
    Tqdm,
}

impl ProgressStyle {
    pub const ALL: [ProgressStyle; 3] = [ProgressStyle::Plain, ProgressStyle::Megatron, ProgressStyle::Tqdm];
}

/// A progress line reporting `step_time_ms` milliseconds per step.
pub fn progress_line<R: Rng + ?Sized>(
    rng: &mut R,
    style: ProgressStyle,
    step: u64,
    total: u64,
    step_time_ms: u32,
) -> String {
    let loss = format!("{}.{:04}", num(rng, 0, 8), num(rng, 0, 10_000));
    let secs = format!("{}.{:03}", step_time_ms / 1000, step_time_ms % 1000);
    match style {
        ProgressStyle::Plain => format!("step {step} loss {loss} step_time {secs}s"),
        ProgressStyle::Megatron => format!(
            " iteration {step:>8}/{total:>8} | elapsed time per iteration (ms): {step_time_ms}.0 | lm loss: {loss} | grad norm: {}.{:03}",
            num(rng, 0, 5),
            num(rng, 0, 1000)
        ),
        ProgressStyle::Tqdm => {
            let pct = (step * 100 / total.max(1)).min(100);
            format!(
                "training epoch {}: {pct}%| {step}/{total} [{:02}:{:02}<{:02}:{:02}, {secs}s/it, loss={loss}]",
                step / total.max(1),
                num(rng, 0, 60),
                num(rng, 0, 60),
                num(rng, 0, 60),
                num(rng, 0, 60)
            )
        }
    }
}

/// The first message of a failure with the given root cause.
pub fn root_cause_line<R: Rng + ?Sized>(rng: &mut R, kind: FailureKind) -> String {
    let rank = rank_tag(rng);
    match (kind.category, kind.component) {
        (ErrorCategory::Infra, Component::Network) => match rng.random_range(0..2) {
            0 => format!(
                "[{rank}]: [E ProcessGroupNCCL.cpp:{}] Watchdog caught collective operation timeout: NCCL timeout after {} ms",
                num(rng, 100, 2000),
                num(rng, 1000, 100_000)
            ),
            _ => format!(
                "[{rank}]: RuntimeError: NCCL error: remote peer failure, connection reset by peer"
            ),
        },
        (ErrorCategory::Infra, Component::Gpu) => match rng.random_range(0..2) {
            0 => format!(
                "NVRM: Xid (PCI:0000:{}:00): 79, fatal error: GPU has fallen off the bus",
                num(rng, 16, 100)
            ),
            _ => format!("[{rank}]: RuntimeError: CUDA error: uncorrectable ECC error encountered"),
        },
        (ErrorCategory::Infra, Component::Nvlink) => format!(
            "[{rank}]: NVLink fatal error on link {} of GPU {}, collective aborted",
            num(rng, 0, 12),
            num(rng, 0, 8)
        ),
        (ErrorCategory::Infra, _) => format!(
            "slurmstepd: error: node worker-{} is not responding, heartbeat lost, job aborted",
            num(rng, 0, 512)
        ),
        (ErrorCategory::Framework, _) => match rng.random_range(0..3) {
            0 => format!(
                "[{rank}]: ImportError: cannot import name '{}' (exception raised while importing)",
                WORDS.choose(rng).unwrap()
            ),
            1 => format!(
                "[{rank}]: RuntimeError: fatal error while restoring state: incompatible checkpoint format"
            ),
            _ => format!(
                "[{rank}]: DeepSpeed engine error: internal assert failed in zero partitioning"
            ),
        },
        (ErrorCategory::UserScript, _) => match rng.random_range(0..4) {
            0 => format!("[{rank}]: RuntimeError: CUDA error: device-side assert triggered"),
            1 => format!(
                "[{rank}]: exception in user code: KeyError: '{}'",
                WORDS.choose(rng).unwrap()
            ),
            2 => format!(
                "[{rank}]: torch.OutOfMemoryError: CUDA out of memory, tried to allocate {} MiB, error",
                num(rng, 2, 20_000)
            ),
            _ => format!(
                "[{rank}]: ValueError exception: shape mismatch between logits and labels, failed"
            ),
        },
    }
}

/// Follow-on error produced after the root cause.
pub fn cascade_line<R: Rng + ?Sized>(rng: &mut R) -> String {
    let rank = rank_tag(rng);
    match rng.random_range(0..6) {
        0 => "Traceback (most recent call last):".to_string(),
        1 => format!(
            "ERROR:torch.distributed.elastic.multiprocessing.api:failed (exitcode: 1) local_rank: {} (pid: {})",
            num(rng, 0, 64),
            num(rng, 1000, 99_999)
        ),
        2 => format!("[{rank}]: fatal error, process exited with code 1"),
        3 => "ChildFailedError: worker script failed with exception".to_string(),
        4 => format!(
            "srun: error: worker-{}: task {}: Exited with exit code 1",
            num(rng, 0, 512),
            num(rng, 0, 64)
        ),
        _ => format!(
            "[{rank}]: NCCL watchdog thread terminated with exception: NCCL error: remote process exited"
        ),
    }
}

/// Benign line interleaved inside a failure cascade (stack frames and the like).
pub fn benign_cascade_line<R: Rng + ?Sized>(rng: &mut R) -> String {
    format!(
        "  File \"/opt/conda/lib/python3.10/site-packages/{}/{}.py\", line {}, in {}",
        MODELS.choose(rng).unwrap(),
        WORDS.choose(rng).unwrap(),
        num(rng, 1, 5000),
        WORDS.choose(rng).unwrap()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::line_signature;
    use crate::tracker::LogClassifier;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn classifier() -> LogClassifier {
        LogClassifier::new(Arc::new(HashingEmbedder::default()), &CategoryLabels::default()).unwrap()
    }

    #[test]
    fn label_vocabularies_do_not_collide() {
        let e = HashingEmbedder::default();
        let labels = CategoryLabels::default();
        let mut owner = std::collections::HashMap::new();
        for c in Category::ALL {
            for t in tokenize(label_text(&labels, c)) {
                if let Some(prev) = owner.insert(e.bucket(&t), c) {
                    assert_eq!(prev, c, "token `{t}` of {c} collides with {prev}");
                }
            }
        }
    }

    #[test]
    fn templates_classify_as_intended() {
        let c = classifier();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let l = init_line(&mut rng);
            assert_eq!(c.classify(&l).unwrap().category, Category::Init, "{l}");
            let l = warning_line(&mut rng);
            assert_eq!(c.classify(&l).unwrap().category, Category::Warning, "{l}");
            let l = noise_line(&mut rng);
            assert_eq!(c.classify(&l).unwrap().category, Category::Misc, "{l}");
            let l = cascade_line(&mut rng);
            assert_eq!(c.classify(&l).unwrap().category, Category::Error, "{l}");
            let l = benign_cascade_line(&mut rng);
            assert_ne!(c.classify(&l).unwrap().category, Category::Error, "{l}");
            for style in ProgressStyle::ALL {
                let step = rng.random_range(0..100_000);
                let ms = num(&mut rng, 50, 5000);
                let l = progress_line(&mut rng, style, step, 100_000, ms);
                assert_eq!(c.classify(&l).unwrap().category, Category::Progress, "{l}");
            }
        }
    }

    #[test]
    fn root_causes_are_errors_and_match_their_rule() {
        let c = classifier();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kinds = [
            FailureKind::infra(Component::Gpu),
            FailureKind::infra(Component::Nvlink),
            FailureKind::infra(Component::Node),
            FailureKind::infra(Component::Network),
            FailureKind::framework(),
            FailureKind::user_script(),
        ];
        for _ in 0..300 {
            for k in kinds {
                let l = root_cause_line(&mut rng, k);
                assert_eq!(c.classify(&l).unwrap().category, Category::Error, "{l}");
                assert_eq!(line_signature(&l), Some((k.category, k.component)), "{l}");
            }
        }
    }

    #[test]
    fn normal_lines_match_no_failure_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            for l in [init_line(&mut rng), warning_line(&mut rng), noise_line(&mut rng), benign_cascade_line(&mut rng)] {
                assert_eq!(line_signature(&l), None, "{l}");
            }
            let l = progress_line(&mut rng, ProgressStyle::Plain, 5, 10, 500);
            assert_eq!(line_signature(&l), None, "{l}");
        }
    }
}
