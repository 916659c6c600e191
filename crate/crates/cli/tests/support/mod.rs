//! Helpers shared by the CLI integration tests and the acceptance target.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Writes `config` to `dir/name.json` and returns the path.
pub fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

/// Runs `gradmatch <command> --config <config> --out <dir/out>` in process and
/// returns the exit code.
pub fn run(command: &str, config: &Path, out: &Path) -> i32 {
    gradmatch_cli::main_with_args([
        "gradmatch",
        command,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

/// A small Shekel pipeline: gen-data, a 5-epoch train, search, report.
/// Returns the bytes of `report.json` and `report.csv`.
pub fn pipeline(root: &Path, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let cfg = json!({
        "seed": seed,
        "data": { "oracle": "shekel", "n": 400 },
        "train": {
            "dataset": "gen/dataset.csv",
            "architecture": { "hidden_layers": [32, 16] },
            "options": { "epochs": 5, "path_count": 32, "batch_size": 16 }
        },
        "search": {
            "model": "train/model.bin",
            "dataset": "gen/dataset.csv",
            "starts": { "strategy": "top_k", "count": 32 },
            "options": { "search_steps": 30 }
        },
        "report": { "runs": ["gen", "train", "search"] }
    });
    let path = write_config(root, "pipeline", &cfg);
    for step in ["gen-data", "train", "search", "report"] {
        let out = root.join(match step {
            "gen-data" => "gen",
            "report" => "report",
            s => s,
        });
        assert_eq!(run(step, &path, &out), 0, "{step} failed");
    }
    (
        fs::read(root.join("report/report.json")).unwrap(),
        fs::read(root.join("report/report.csv")).unwrap(),
    )
}
