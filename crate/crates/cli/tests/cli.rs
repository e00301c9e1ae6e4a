mod common;

use std::path::Path;
use std::process::Command;

use common::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use volspill_cli::commands::{CoefficientRecord, CyclicalityRecord, DailyReturnRecord, FitStatsRecord, NetRecord};
use volspill_core::io::{self, ForecastPlotRecord, ForecastRecord, LossRecord, McsRatioRecord, McsRecord, R2Record};
use volspill_core::MeasureKind;

fn round_trip<T: Serialize + DeserializeOwned>(path: &Path, tsv: bool) {
    let scratch = tempfile::tempdir().unwrap();
    let copy = scratch.path().join("copy");
    if tsv {
        let recs: Vec<T> = io::read_tsv(path).unwrap();
        io::write_tsv(&copy, &recs).unwrap();
    } else {
        let recs: Vec<T> = io::read_csv(path).unwrap();
        io::write_csv(&copy, &recs).unwrap();
    }
    assert_eq!(std::fs::read(path).unwrap(), std::fs::read(&copy).unwrap(), "{}", path.display());
}

#[test]
fn run_all_emits_every_artifact_and_csvs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &tiny_config());
    let out = dir.path().join("out");
    let o = run_all(&config, &out);
    assert!(o.status.success(), "{}", stderr(&o));

    let expected = [
        "ticks.csv",
        "ground_truth.json",
        "measures/measures_RV.csv",
        "measures/daily_returns.csv",
        "spillover/spillover_tsi_RV.csv",
        "spillover/spillover_index_RS_minus.csv",
        "spillover/spillover_pairs_RS_plus.csv",
        "spillover/spillover_summary_RV.json",
        "spillover/npdc_into_BTC_RV.json",
        "spillover/cyclicality_BTC.csv",
        "features/sources_BTC.json",
        "features/sa_feature_BTC_RV.csv",
        "fit/fits.json",
        "fit/coefficients.csv",
        "fit/statistics.csv",
        "forecasts/oos30/forecasts_SA-Log-HAR-RV_5.csv",
        "forecasts/oos30/forecasts_GARCH_1_1_1.csv",
        "evaluation/oos30/losses_1.csv",
        "evaluation/oos30/mcs_5.csv",
        "evaluation/oos30/mcs_ratio_5.csv",
        "evaluation/oos30/r2oos.csv",
        "plots/tsi_RV.tsv",
        "plots/net_RV.tsv",
        "plots/forecasts_oos30_1.tsv",
    ];
    for f in expected {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    for kind in [MeasureKind::Rv, MeasureKind::RsPlus, MeasureKind::RsMinus] {
        let path = out.join(format!("measures/measures_{kind}.csv"));
        let panel = io::read_measure_file(&path, kind).unwrap();
        let copy = dir.path().join("copy.csv");
        io::write_measure_file(&copy, &panel).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&copy).unwrap());
    }
    round_trip::<DailyReturnRecord>(&out.join("measures/daily_returns.csv"), false);
    round_trip::<io::TsiRecord>(&out.join("spillover/spillover_tsi_RV.csv"), false);
    round_trip::<io::IndexRecord>(&out.join("spillover/spillover_index_RV.csv"), false);
    round_trip::<io::PairRecord>(&out.join("spillover/spillover_pairs_RV.csv"), false);
    round_trip::<CyclicalityRecord>(&out.join("spillover/cyclicality_BTC.csv"), false);
    round_trip::<io::FeatureRecord>(&out.join("features/sa_feature_BTC_RV.csv"), false);
    round_trip::<CoefficientRecord>(&out.join("fit/coefficients.csv"), false);
    round_trip::<FitStatsRecord>(&out.join("fit/statistics.csv"), false);
    round_trip::<ForecastRecord>(&out.join("forecasts/oos30/forecasts_Lasso-SA-Log-HAR-RS_1.csv"), false);
    round_trip::<LossRecord>(&out.join("evaluation/oos30/losses_5.csv"), false);
    round_trip::<McsRecord>(&out.join("evaluation/oos30/mcs_1.csv"), false);
    round_trip::<McsRatioRecord>(&out.join("evaluation/oos30/mcs_ratio_1.csv"), false);
    round_trip::<R2Record>(&out.join("evaluation/oos30/r2oos.csv"), false);
    round_trip::<io::TsiRecord>(&out.join("plots/tsi_RS_plus.tsv"), true);
    round_trip::<NetRecord>(&out.join("plots/net_RV.tsv"), true);
    round_trip::<ForecastPlotRecord>(&out.join("plots/forecasts_oos30_5.tsv"), true);

    let losses: Vec<LossRecord> = io::read_csv(&out.join("evaluation/oos30/losses_1.csv")).unwrap();
    assert_eq!(losses.len(), 4);
    assert!(losses.iter().all(|l| l.n == 30 && l.mse.is_finite()));
}

#[test]
fn evaluate_without_forecasts_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &tiny_config());
    let out = dir.path().join("empty");
    let o = volspill(&["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "evaluate"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("forecasts_Log-HAR-RV_1.csv"), "{err}");
}

#[test]
fn missing_config_file_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nope.json");
    let o = volspill(&["--config", path.to_str().unwrap(), "measures"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.json"));
}

#[test]
fn schema_violations_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config();
    cfg["evaluation"]["horizon"] = serde_json::json!([1]);
    let o = volspill(&["--config", write_config(dir.path(), &cfg).to_str().unwrap(), "measures"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`horizon`"), "{}", stderr(&o));

    let mut cfg = tiny_config();
    cfg["models"] = serde_json::json!(["SA-Log-HAR-REX"]);
    let o = volspill(&["--config", write_config(dir.path(), &cfg).to_str().unwrap(), "measures"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("measures.kinds"), "{}", stderr(&o));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &tiny_config());
    let ticks = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = volspill(&[
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "simulate",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("ticks.csv")).unwrap()
    };
    assert_eq!(ticks("3", "a"), ticks("3", "b"));
    assert_ne!(ticks("3", "a"), ticks("4", "c"));
}

#[test]
fn output_dir_comes_from_the_environment_unless_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &tiny_config());
    let env_out = dir.path().join("from_env");
    let run = |extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_volspill"));
        cmd.args(["--config", config.to_str().unwrap()])
            .args(extra)
            .arg("simulate")
            .env("VOLSPILL_OUTPUT_DIR", &env_out)
            .env("RUST_LOG", "warn");
        assert!(cmd.status().unwrap().success());
    };
    run(&[]);
    assert!(env_out.join("ticks.csv").is_file());
    let flag_out = dir.path().join("from_flag");
    run(&["--out", flag_out.to_str().unwrap()]);
    assert!(flag_out.join("ticks.csv").is_file());
}
