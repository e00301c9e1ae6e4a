#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

/// A small synthetic pipeline that still exercises every stage.
pub fn tiny_config() -> Value {
    json!({
        "target": "BTC",
        "interval_secs": 1800,
        "seed": 11,
        "source_refit_every": 12,
        "measures": { "kinds": ["RV", "RS_plus", "RS_minus"] },
        "qvar": { "window": 80, "refresh_every": 40 },
        "models": ["Log-HAR-RV", "SA-Log-HAR-RV", "Lasso-SA-Log-HAR-RS"],
        "evaluation": {
            "presets": [{ "name": "oos30", "span": 30 }],
            "horizons": [1, 5],
            "mcs": { "alpha": 0.1, "bootstrap": 100, "block_len": 3 }
        },
        "simulate": {
            "assets": ["BTC", "ETH", "LTC"],
            "days": 300,
            "steps_per_day": 48,
            "mean_log_iv": [-7.5, -7.2, -7.0],
            "var_coef": [[0.6, 0.3, 0.0], [0.0, 0.7, 0.0], [0.0, 0.0, 0.5]],
            "gain": { "target": 0, "source": 1, "gain": 0.3, "high_threshold": 1.0 }
        }
    })
}

pub fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

pub fn volspill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volspill"))
        .args(args)
        .env_remove("VOLSPILL_OUTPUT_DIR")
        .env_remove("VOLSPILL_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn volspill")
}

pub fn run_all(config: &Path, out: &Path) -> Output {
    volspill(&["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "run-all"])
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Relative path -> contents for every file under `root`.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
