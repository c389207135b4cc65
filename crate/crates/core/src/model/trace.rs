//! Header-first CSV trace format.
//!
//! Required columns, in this order:
//! `job_id,user,job_name,submit_time,num_gpus,true_duration,final_status,sm_util_steady,warmup_seconds,logs_progress`
//!
//! Optional columns may follow in any order: `sm_util_warmup`, `metadata_path`,
//! `log_path`, `failure_offsets`, `failure_kinds`, `slowdown_buckets`, `workdir`,
//! `launch_command`, `step_time`. Unknown columns are ignored.
//!
//! List-valued cells use `;` as separator:
//! - `failure_offsets`: `1200;5400` (seconds of work into the run)
//! - `failure_kinds`: `INFRA/GPU;USER_SCRIPT/NONE` (same length as offsets)
//! - `slowdown_buckets`: `80:0.4;90:0.35` (co-runner utilization decade lower
//!   bound to throughput retention)

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::job::{FailureKind, JobSpec, JobTruth, TraceRecord, DEFAULT_STEP_TIME_S};
use super::ModelError;

pub const REQUIRED_COLUMNS: [&str; 10] = [
    "job_id",
    "user",
    "job_name",
    "submit_time",
    "num_gpus",
    "true_duration",
    "final_status",
    "sm_util_steady",
    "warmup_seconds",
    "logs_progress",
];

pub const OPTIONAL_COLUMNS: [&str; 9] = [
    "sm_util_warmup",
    "metadata_path",
    "log_path",
    "failure_offsets",
    "failure_kinds",
    "slowdown_buckets",
    "workdir",
    "launch_command",
    "step_time",
];

pub fn parse_trace_file(path: &Path) -> Result<Vec<TraceRecord>, ModelError> {
    let file = std::fs::File::open(path)
        .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    parse_trace(file)
}

pub fn parse_trace<R: Read>(reader: R) -> Result<Vec<TraceRecord>, ModelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| ModelError::Parse {
            line: 1,
            column: "header".into(),
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < REQUIRED_COLUMNS.len() || names[..REQUIRED_COLUMNS.len()] != REQUIRED_COLUMNS
    {
        return Err(ModelError::Parse {
            line: 1,
            column: "header".into(),
            message: format!(
                "header must start with `{}`, got `{}`",
                REQUIRED_COLUMNS.join(","),
                names.join(",")
            ),
        });
    }
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, i))
        .collect();

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (row, result) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = result.map_err(|e| ModelError::Parse {
            line,
            column: "-".into(),
            message: e.to_string(),
        })?;
        let get = |col: &str| -> Option<&str> {
            index
                .get(col)
                .and_then(|&i| rec.get(i))
                .map(str::trim)
                .filter(|s| !s.is_empty())
        };
        let err = |col: &str, message: String| ModelError::Parse {
            line,
            column: col.into(),
            message,
        };
        let required = |col: &str| -> Result<&str, ModelError> {
            get(col).ok_or_else(|| err(col, "missing value".into()))
        };
        fn num<T: std::str::FromStr>(s: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            s.parse::<T>().map_err(|e| format!("`{s}`: {e}"))
        }

        let job_id = required("job_id")?.to_string();
        if !seen.insert(job_id.clone()) {
            return Err(err("job_id", format!("duplicate job_id `{job_id}`")));
        }
        let spec = JobSpec {
            job_id,
            user: get("user").unwrap_or("").to_string(),
            job_name: get("job_name").unwrap_or("").to_string(),
            submit_time: num(required("submit_time")?).map_err(|m| err("submit_time", m))?,
            num_gpus: num(required("num_gpus")?).map_err(|m| err("num_gpus", m))?,
            workdir: get("workdir").map(PathBuf::from),
            launch_command: get("launch_command").map(str::to_string),
            log_path: get("log_path").map(PathBuf::from),
            metadata_path: get("metadata_path").map(PathBuf::from),
        };
        if spec.num_gpus == 0 {
            return Err(err("num_gpus", "must be >= 1".into()));
        }
        let steady: f64 =
            num(required("sm_util_steady")?).map_err(|m| err("sm_util_steady", m))?;
        let warmup_util = match get("sm_util_warmup") {
            Some(s) => num(s).map_err(|m| err("sm_util_warmup", m))?,
            None => steady,
        };
        let logs_progress = match required("logs_progress")?.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => return Err(err("logs_progress", format!("`{other}` is not a boolean"))),
        };

        let offsets: Vec<u64> = split_list(get("failure_offsets"))
            .map(|s| num(s).map_err(|m| err("failure_offsets", m)))
            .collect::<Result<_, _>>()?;
        let kinds: Vec<FailureKind> = split_list(get("failure_kinds"))
            .map(|s| s.parse().map_err(|e: ModelError| err("failure_kinds", e.to_string())))
            .collect::<Result<_, _>>()?;
        if offsets.len() != kinds.len() {
            return Err(err(
                "failure_kinds",
                format!(
                    "{} kinds for {} offsets",
                    kinds.len(),
                    offsets.len()
                ),
            ));
        }
        let mut failure_events: Vec<(u64, FailureKind)> =
            offsets.into_iter().zip(kinds).collect();
        failure_events.sort_by_key(|(o, _)| *o);

        let mut table = BTreeMap::new();
        for item in split_list(get("slowdown_buckets")) {
            let (b, r) = item
                .split_once(':')
                .ok_or_else(|| err("slowdown_buckets", format!("`{item}` is not bucket:retention")))?;
            let lower: u32 = num(b.trim()).map_err(|m| err("slowdown_buckets", m))?;
            if lower % 10 != 0 || lower > 90 {
                return Err(err(
                    "slowdown_buckets",
                    format!("bucket `{lower}` must be a decade lower bound 0..=90"),
                ));
            }
            let r: f64 = num(r.trim()).map_err(|m| err("slowdown_buckets", m))?;
            table.insert((lower / 10) as u8, r);
        }

        let truth = JobTruth {
            true_duration: num(required("true_duration")?)
                .map_err(|m| err("true_duration", m))?,
            final_status: required("final_status")?
                .parse()
                .map_err(|e: ModelError| err("final_status", e.to_string()))?,
            sm_util_steady: steady,
            sm_util_warmup: warmup_util,
            warmup_seconds: num(required("warmup_seconds")?)
                .map_err(|m| err("warmup_seconds", m))?,
            logs_progress,
            failure_events,
            pack_slowdown_table: table,
            step_time_s: match get("step_time") {
                Some(s) => num(s).map_err(|m| err("step_time", m))?,
                None => DEFAULT_STEP_TIME_S,
            },
        };
        truth.validate().map_err(|e| err("row", e.to_string()))?;
        out.push(TraceRecord { spec, truth });
    }
    Ok(out)
}

fn split_list(cell: Option<&str>) -> impl Iterator<Item = &str> {
    cell.unwrap_or("")
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

/// Writes records with the full column set.
pub fn serialize_trace<W: Write>(records: &[TraceRecord], writer: W) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = REQUIRED_COLUMNS
        .iter()
        .chain(OPTIONAL_COLUMNS.iter())
        .copied()
        .collect();
    w.write_record(&header).map_err(io_err)?;
    for r in records {
        let s = &r.spec;
        let t = &r.truth;
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let offsets = t
            .failure_events
            .iter()
            .map(|(o, _)| o.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let kinds = t
            .failure_events
            .iter()
            .map(|(_, k)| k.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let buckets = t
            .pack_slowdown_table
            .iter()
            .map(|(b, r)| format!("{}:{}", u32::from(*b) * 10, r))
            .collect::<Vec<_>>()
            .join(";");
        let row = [
            s.job_id.clone(),
            s.user.clone(),
            s.job_name.clone(),
            s.submit_time.to_string(),
            s.num_gpus.to_string(),
            t.true_duration.to_string(),
            t.final_status.to_string(),
            t.sm_util_steady.to_string(),
            t.warmup_seconds.to_string(),
            t.logs_progress.to_string(),
            t.sm_util_warmup.to_string(),
            path(&s.metadata_path),
            path(&s.log_path),
            offsets,
            kinds,
            buckets,
            path(&s.workdir),
            s.launch_command.clone().unwrap_or_default(),
            t.step_time_s.to_string(),
        ];
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| ModelError::Io(e.to_string()))?;
    Ok(())
}

pub fn write_trace_file(records: &[TraceRecord], path: &Path) -> Result<(), ModelError> {
    let file = std::fs::File::create(path)
        .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    serialize_trace(records, std::io::BufWriter::new(file))
}

fn io_err(e: csv::Error) -> ModelError {
    ModelError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::job::{Component, FinalStatus};

    const HEADER: &str = "job_id,user,job_name,submit_time,num_gpus,true_duration,final_status,sm_util_steady,warmup_seconds,logs_progress";

    #[test]
    fn direct_field_mapping() {
        let text = format!("{HEADER}\nj1,alice,bert,0,4,3600,COMPLETED,60,120,true\n");
        let recs = parse_trace(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.spec.job_id, "j1");
        assert_eq!(r.spec.user, "alice");
        assert_eq!(r.spec.job_name, "bert");
        assert_eq!(r.spec.num_gpus, 4);
        assert_eq!(r.spec.submit_time, 0);
        assert_eq!(r.truth.true_duration, 3600);
        assert_eq!(r.truth.final_status, FinalStatus::Completed);
        assert_eq!(r.truth.sm_util_steady, 60.0);
        assert_eq!(r.truth.warmup_seconds, 120);
        assert!(r.truth.logs_progress);
        assert_eq!(r.truth.sm_util_warmup, 60.0);
    }

    #[test]
    fn header_only_is_empty() {
        let text = format!("{HEADER}\n");
        assert!(parse_trace(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_job_id_rejected() {
        let text = format!(
            "{HEADER}\nj1,a,b,0,1,10,COMPLETED,50,0,true\nj1,a,b,5,1,10,COMPLETED,50,0,true\n"
        );
        let err = parse_trace(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn malformed_cell_names_line_and_column() {
        let text = format!("{HEADER}\nj1,a,b,0,four,10,COMPLETED,50,0,true\n");
        let err = parse_trace(text.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("num_gpus"), "{msg}");
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "id,user\nj1,a\n";
        assert!(parse_trace(text.as_bytes()).is_err());
    }

    #[test]
    fn optional_and_unknown_columns() {
        let text = format!(
            "{HEADER},failure_offsets,failure_kinds,slowdown_buckets,color\n\
             j1,a,b,0,2,1000,FAILED,80,50,false,600;200,USER_SCRIPT/NONE;INFRA/GPU,80:0.4;90:0.3,blue\n"
        );
        let r = &parse_trace(text.as_bytes()).unwrap()[0];
        assert_eq!(
            r.truth.failure_events,
            vec![
                (200, FailureKind::infra(Component::Gpu)),
                (600, FailureKind::user_script())
            ]
        );
        assert_eq!(r.truth.retention_against(85.0), 0.4);
        assert_eq!(r.truth.retention_against(95.0), 0.3);
    }
}
