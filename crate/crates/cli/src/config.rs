//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use volspill_core::evaluation::LossOptions;
use volspill_core::measures::ingest::DEFAULT_INTERVAL_SECS;
use volspill_core::{DgpConfig, GarchKind, HarSpec, MeasureKind, MeasureParams, QvarSpec, StateConfig};

use crate::error::CliError;

pub const OUTPUT_ENV: &str = "VOLSPILL_OUTPUT_DIR";
pub const THREADS_ENV: &str = "VOLSPILL_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    /// Assets to keep from the input; empty keeps all of them.
    pub assets: Vec<String>,
    /// Asset whose volatility is forecast.
    pub target: String,
    /// Intraday sampling interval in seconds.
    pub interval_secs: u32,
    pub measures: MeasuresConfig,
    pub qvar: QvarSpec,
    pub state: StateConfig,
    /// Model names, e.g. `Log-HAR-RV`, `SA-Log-HAR-CJ`, `Lasso-SA-Log-HAR-REX`.
    pub models: Vec<String>,
    /// GARCH benchmark forecast alongside the HAR models; `null` disables it.
    pub benchmark: Option<GarchKind>,
    pub evaluation: EvaluationConfig,
    /// Re-estimate spillover sources every this many days of forecast origin.
    pub source_refit_every: usize,
    /// Master seed: synthetic draws and bootstrap replicates.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `null` uses every available core.
    pub threads: Option<usize>,
    /// Synthetic data generator used by `simulate`.
    pub simulate: Option<DgpConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Tick CSV `timestamp,asset,price`; defaults to `<output_dir>/ticks.csv`.
    pub ticks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasuresConfig {
    pub kinds: Vec<MeasureKind>,
    pub params: MeasureParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Rolling,
    Expanding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    /// Number of out-of-sample forecast dates.
    pub span: usize,
    /// Estimation window; `null` uses every day before the first forecast.
    #[serde(default)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McsSettings {
    pub alpha: f64,
    pub bootstrap: usize,
    pub block_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub presets: Vec<Preset>,
    pub horizons: Vec<usize>,
    pub scheme: SchemeKind,
    pub loss: LossOptions,
    pub mcs: McsSettings,
    /// Model every R^2_oos is measured against.
    pub r2_benchmark: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Inputs::default(),
            assets: Vec::new(),
            target: "BTC".into(),
            interval_secs: DEFAULT_INTERVAL_SECS,
            measures: MeasuresConfig::default(),
            qvar: QvarSpec::default(),
            state: StateConfig::default(),
            models: HarSpec::standard_models().iter().map(HarSpec::name).collect(),
            benchmark: Some(GarchKind::Garch11),
            evaluation: EvaluationConfig::default(),
            source_refit_every: 1,
            seed: 42,
            output_dir: PathBuf::from("output"),
            threads: None,
            simulate: None,
        }
    }
}

impl Default for MeasuresConfig {
    fn default() -> Self {
        Self {
            kinds: MeasureKind::ALL.into_iter().filter(|k| *k != MeasureKind::Rk).collect(),
            params: MeasureParams::default(),
        }
    }
}

impl Default for McsSettings {
    fn default() -> Self {
        let d = volspill_core::McsConfig::default();
        Self {
            alpha: d.alpha,
            bootstrap: d.bootstrap,
            block_len: d.block_len,
        }
    }
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            presets: vec![
                Preset {
                    name: "oos300".into(),
                    span: 300,
                    window: None,
                },
                Preset {
                    name: "oos500".into(),
                    span: 500,
                    window: Some(1000),
                },
            ],
            horizons: vec![1, 5, 22],
            scheme: SchemeKind::Rolling,
            loss: LossOptions::default(),
            mcs: McsSettings::default(),
            r2_benchmark: "Log-HAR-RV".into(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::missing(path, e))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| CliError::User(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.output_dir = base.join(&cfg.output_dir);
        if let Some(t) = cfg.inputs.ticks.take() {
            cfg.inputs.ticks = Some(base.join(t));
        }
        Ok(cfg)
    }

    pub fn model_specs(&self) -> Result<Vec<HarSpec>, CliError> {
        self.models
            .iter()
            .map(|m| m.parse::<HarSpec>().map_err(|e| CliError::User(format!("models: {e}"))))
            .collect()
    }

    /// Names of every forecast model, HAR variants first.
    pub fn forecast_models(&self) -> Vec<String> {
        let mut out = self.models.clone();
        if let Some(kind) = self.benchmark {
            out.push(benchmark_name(kind).to_string());
        }
        out
    }

    pub fn ticks_path(&self) -> PathBuf {
        self.inputs.ticks.clone().unwrap_or_else(|| self.output_dir.join("ticks.csv"))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::User(format!("{field}: {msg}")));
        let specs = self.model_specs()?;
        if specs.is_empty() && self.benchmark.is_none() {
            return bad("models", "at least one model is required".into());
        }
        for kind in specs.iter().flat_map(|s| s.family.kinds()).chain(&[MeasureKind::Rv]) {
            if !self.measures.kinds.contains(kind) {
                return bad("measures.kinds", format!("{kind} is required by the configured models"));
            }
        }
        if !self.assets.is_empty() && !self.assets.contains(&self.target) {
            return bad("target", format!("`{}` is not among the configured assets", self.target));
        }
        if self.interval_secs == 0 || 86_400 % self.interval_secs != 0 {
            return bad("interval_secs", "must divide 86400".into());
        }
        if self.source_refit_every == 0 {
            return bad("source_refit_every", "must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads", "must be positive".into());
        }
        self.qvar.validate().map_err(|e| CliError::User(format!("qvar: {e}")))?;
        self.state.validate().map_err(|e| CliError::User(format!("state: {e}")))?;
        for tau in [self.state.tau_low, self.state.tau_mid, self.state.tau_high] {
            if !self.qvar.quantiles.iter().any(|q| (q - tau).abs() < 1e-12) {
                return bad("qvar.quantiles", format!("state quantile {tau} is not estimated"));
            }
        }
        if let Some(sim) = &self.simulate {
            sim.validate().map_err(|e| CliError::User(format!("simulate: {e}")))?;
            if 86_400 / sim.steps_per_day as u32 != self.interval_secs {
                return bad(
                    "interval_secs",
                    format!("simulated steps of {}s do not match", 86_400 / sim.steps_per_day),
                );
            }
        }
        let ev = &self.evaluation;
        if ev.presets.is_empty() {
            return bad("evaluation.presets", "at least one preset is required".into());
        }
        let mut names: Vec<&str> = ev.presets.iter().map(|p| p.name.as_str()).collect();
        names.sort();
        names.dedup();
        if names.len() != ev.presets.len() {
            return bad("evaluation.presets", "preset names must be unique".into());
        }
        for p in &ev.presets {
            if p.span == 0 || p.window == Some(0) {
                return bad("evaluation.presets", format!("`{}` needs a positive span and window", p.name));
            }
            if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return bad("evaluation.presets", format!("`{}` is not a usable directory name", p.name));
            }
        }
        if ev.horizons.is_empty() || ev.horizons.contains(&0) {
            return bad("evaluation.horizons", "need at least one positive horizon".into());
        }
        if !self.forecast_models().contains(&ev.r2_benchmark) {
            return bad("evaluation.r2_benchmark", format!("`{}` is not a configured model", ev.r2_benchmark));
        }
        if !(ev.mcs.alpha > 0.0 && ev.mcs.alpha < 1.0) || ev.mcs.bootstrap == 0 || ev.mcs.block_len == 0 {
            return bad("evaluation.mcs", "alpha must lie in (0, 1); bootstrap and block_len positive".into());
        }
        Ok(())
    }
}

pub fn benchmark_name(kind: GarchKind) -> &'static str {
    match kind {
        GarchKind::Garch11 => "GARCH(1,1)",
        GarchKind::Gjr => "GJR-GARCH",
    }
}
