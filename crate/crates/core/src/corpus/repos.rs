//! Source-tree fixtures whose configuration encodes known workload metadata.

use std::fs;
use std::path::Path;

use serde_json::Value;

use super::CorpusError;
use crate::model::WorkloadMetadata;

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn extra(md_extras: &crate::model::metadata::Extras, key: &str) -> Option<String> {
    md_extras.get(key).map(scalar)
}

fn iter_key(md: &WorkloadMetadata) -> &'static str {
    if md.training_config.iter_type == "epoch" {
        "num_epochs"
    } else {
        "train_iters"
    }
}

/// Writes a small training repository for `md` and returns its launch command.
///
/// `layout` picks one of three styles: split YAML configs with argparse
/// defaults, a single JSON config plus command-line flags, or a launcher
/// shell script.
pub fn write_repo(dir: &Path, md: &WorkloadMetadata, layout: usize) -> Result<String, CorpusError> {
    fs::create_dir_all(dir)?;
    let m = &md.model_config;
    let t = &md.training_config;
    let d = &md.dataset_config;
    fs::write(
        dir.join("README.md"),
        format!("# {}\n\nTraining code for {} experiments.\n", m.model_name, m.task_type),
    )?;
    fs::create_dir_all(dir.join("data"))?;
    fs::write(dir.join("data/shard-000.bin"), [0u8, 159, 146, 150, 255, 1, 2, 3])?;
    let mut model_lines = vec![
        format!("model_name: {}", m.model_name),
        format!("task_type: {}", m.task_type),
    ];
    for k in ["d_model", "n_layer"] {
        if let Some(v) = extra(&m.extras, k) {
            model_lines.push(format!("{k}: {v}"));
        }
    }
    let mut argparse = Vec::new();
    for k in ["batch_size", "lr"] {
        if let Some(v) = extra(&t.extras, k) {
            argparse.push((k.to_string(), v));
        }
    }
    let tokenizer = extra(&d.extras, "tokenizer");
    let cmd = match layout % 3 {
        0 => {
            fs::create_dir_all(dir.join("configs"))?;
            fs::write(dir.join("configs/model.yaml"), model_lines.join("\n") + "\n")?;
            let mut data = vec![format!("train: {}", d.train), format!("valid: {}", d.valid)];
            if let Some(tok) = &tokenizer {
                data.push(format!("tokenizer: {tok}"));
            }
            fs::write(dir.join("configs/data.yaml"), data.join("\n") + "\n")?;
            argparse.push((iter_key(md).to_string(), t.iters.to_string()));
            let mut py = String::from("import argparse\n\n\ndef parse():\n    p = argparse.ArgumentParser()\n");
            py.push_str("    p.add_argument(\"--config\", type=str, default=\"configs/model.yaml\")\n");
            for (k, v) in &argparse {
                py.push_str(&format!("    p.add_argument(\"--{}\", default={v})\n", k.replace('_', "-")));
            }
            py.push_str("    return p.parse_args()\n\n\nif __name__ == \"__main__\":\n    args = parse()\n");
            fs::write(dir.join("train.py"), py)?;
            "python train.py --config configs/model.yaml --data configs/data.yaml".to_string()
        }
        1 => {
            let mut cfg = serde_json::Map::new();
            cfg.insert("model_name".into(), Value::from(m.model_name.clone()));
            cfg.insert("task_type".into(), Value::from(m.task_type.clone()));
            for (k, v) in m.extras.iter().chain(t.extras.iter()) {
                cfg.insert(k.clone(), v.clone());
            }
            cfg.insert("train_data".into(), Value::from(d.train.clone()));
            cfg.insert("valid_data".into(), Value::from(d.valid.clone()));
            if let Some(tok) = &tokenizer {
                cfg.insert("tokenizer".into(), Value::from(tok.clone()));
            }
            let text = serde_json::to_string_pretty(&Value::Object(cfg))
                .map_err(|e| CorpusError::Format(e.to_string()))?;
            fs::write(dir.join("config.json"), text + "\n")?;
            fs::write(dir.join("run.py"), "import json\nimport sys\n\ncfg = json.load(open(sys.argv[2]))\n")?;
            format!("python run.py --cfg config.json --{} {}", iter_key(md), t.iters)
        }
        _ => {
            fs::create_dir_all(dir.join("scripts"))?;
            let mut flags = vec![
                format!("--model {}", m.model_name),
                format!("--task {}", m.task_type),
                format!("--{} {}", iter_key(md).replace('_', "-"), t.iters),
                format!("--train-data {}", d.train),
                format!("--valid-data {}", d.valid),
            ];
            for (k, v) in &argparse {
                flags.push(format!("--{} {v}", k.replace('_', "-")));
            }
            let sh = format!(
                "#!/bin/bash\nset -e\ntorchrun --nproc_per_node 8 pretrain.py \\\n    {}\n",
                flags.join(" \\\n    ")
            );
            fs::write(dir.join("scripts/launch.sh"), sh)?;
            fs::write(dir.join("pretrain.py"), "import torch\n\n\ndef main():\n    pass\n")?;
            "bash scripts/launch.sh".to_string()
        }
    };
    Ok(cmd)
}
