//! Log text the simulated jobs would have written.
//!
//! Generation is keyed by job id and purpose only, so the same job always
//! prints the same log regardless of which run or policy asks for it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::vocab::{self, ProgressStyle};
use crate::corpus::{gen_failure_log, FailureLogSpec};
use crate::model::{FailureKind, LogDocument};

/// Lines in a synthesized failure log.
pub const FAILURE_LOG_LINES: usize = 1000;

fn rng_for(key: &str) -> ChaCha8Rng {
    let h = Sha256::digest(key.as_bytes());
    let mut b = [0u8; 32];
    b.copy_from_slice(&h);
    ChaCha8Rng::from_seed(b)
}

/// Log of the `k`-th failure of `job_id`.
pub fn failure_log(job_id: &str, k: usize, kind: FailureKind) -> LogDocument {
    let mut rng = rng_for(&format!("failure/{job_id}/{k}"));
    let spec = FailureLogSpec {
        len: FAILURE_LOG_LINES,
        first_error: rng.random_range(100..FAILURE_LOG_LINES / 2),
        kind,
        interleave: 0.1,
        max_benign_run: 12,
        cascade: true,
    };
    gen_failure_log(&spec, &mut rng)
}

/// Progress output of `steps` consecutive steps starting after `first_step`.
///
/// When the job does not report progress the same amount of unrelated
/// output is produced instead.
pub fn progress_log(
    job_id: &str,
    tag: &str,
    first_step: u64,
    steps: u64,
    step_time_s: f64,
    logs_progress: bool,
) -> Vec<String> {
    let mut rng = rng_for(&format!("progress/{job_id}/{tag}/{first_step}"));
    let style = ProgressStyle::ALL[rng_for(&format!("style/{job_id}")).random_range(0..3)];
    let ms = (step_time_s * 1000.0).round().clamp(1.0, u32::MAX as f64) as u32;
    let mut lines = Vec::with_capacity(steps as usize * 2);
    for i in 0..steps {
        if logs_progress {
            let step = first_step + i + 1;
            lines.push(vocab::progress_line(&mut rng, style, step, step.max(1_000_000), ms));
        } else {
            lines.push(vocab::noise_line(&mut rng));
        }
        for _ in 0..rng.random_range(0..3) {
            lines.push(vocab::noise_line(&mut rng));
        }
    }
    lines
}
