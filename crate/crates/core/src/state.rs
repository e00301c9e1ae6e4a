//! State-adaptive spillover feature.
//!
//! The target's own measure is split into Low / Normal / High days by its empirical
//! quantiles; each state gets the peer with the largest net pairwise inflow at the
//! matching quantile, and the feature on day `t` is that peer's measure on `t - 1`.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MeasurePanel;
use crate::numeric::quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateConfig {
    pub tau_low: f64,
    pub tau_high: f64,
    pub tau_mid: f64,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            tau_low: 0.05,
            tau_high: 0.95,
            tau_mid: 0.5,
        }
    }
}

impl StateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.tau_low && self.tau_low < self.tau_high && self.tau_high < 1.0) {
            return Err(Error::invalid(format!(
                "state quantiles must satisfy 0 < {} < {} < 1",
                self.tau_low, self.tau_high
            )));
        }
        if !(0.0 < self.tau_mid && self.tau_mid < 1.0) {
            return Err(Error::invalid("normal-state quantile must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn tau_for(&self, state: MarketState) -> f64 {
        match state {
            MarketState::Low => self.tau_low,
            MarketState::Normal => self.tau_mid,
            MarketState::High => self.tau_high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MarketState {
    Low,
    Normal,
    High,
}

impl MarketState {
    pub const ALL: [MarketState; 3] = [MarketState::Low, MarketState::Normal, MarketState::High];
}

impl fmt::Display for MarketState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarketState::Low => "Low",
            MarketState::Normal => "Normal",
            MarketState::High => "High",
        })
    }
}

impl FromStr for MarketState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Low" => Ok(MarketState::Low),
            "Normal" => Ok(MarketState::Normal),
            "High" => Ok(MarketState::High),
            other => Err(Error::invalid(format!("unknown market state `{other}`"))),
        }
    }
}

/// Low/High cut points estimated on an estimation sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateThresholds {
    pub low: f64,
    pub high: f64,
    /// Low and High thresholds coincide; every day is labeled Normal.
    pub degenerate: bool,
}

impl StateThresholds {
    pub const MIN_SAMPLE: usize = 20;

    pub fn estimate(sample: &[f64], cfg: &StateConfig) -> Result<Self> {
        cfg.validate()?;
        if sample.len() < Self::MIN_SAMPLE {
            return Err(Error::InsufficientData {
                what: "market state classification".into(),
                needed: Self::MIN_SAMPLE,
                got: sample.len(),
            });
        }
        if let Some(index) = sample.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                asset: None,
                day: None,
            });
        }
        let low = quantile(sample, cfg.tau_low);
        let high = quantile(sample, cfg.tau_high);
        let degenerate = low == high;
        if degenerate {
            log::debug!("state thresholds coincide at {low}; all days labeled Normal");
        }
        Ok(Self { low, high, degenerate })
    }

    pub fn label(&self, v: f64) -> MarketState {
        if self.degenerate {
            MarketState::Normal
        } else if v <= self.low {
            MarketState::Low
        } else if v >= self.high {
            MarketState::High
        } else {
            MarketState::Normal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateLabelSeries {
    pub labels: Vec<MarketState>,
    pub thresholds: StateThresholds,
}

impl StateLabelSeries {
    pub fn count(&self, s: MarketState) -> usize {
        self.labels.iter().filter(|l| **l == s).count()
    }
}

/// Label every day of `series` using quantiles of `series` itself.
pub fn classify_states(series: &[f64], cfg: &StateConfig) -> Result<StateLabelSeries> {
    let thresholds = StateThresholds::estimate(series, cfg)?;
    Ok(classify_with(series, thresholds))
}

/// Label `series` with thresholds estimated elsewhere (e.g. an estimation window).
pub fn classify_with(series: &[f64], thresholds: StateThresholds) -> StateLabelSeries {
    StateLabelSeries {
        labels: series.iter().map(|v| thresholds.label(*v)).collect(),
        thresholds,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceChoice {
    pub state: MarketState,
    pub tau: f64,
    pub source: String,
    pub npdc: f64,
}

/// Dominant spillover source into `target` for each market state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMap {
    pub target: String,
    pub sources: Vec<SourceChoice>,
}

impl SourceMap {
    pub fn source_for(&self, state: MarketState) -> &str {
        &self
            .sources
            .iter()
            .find(|c| c.state == state)
            .expect("source map covers every state")
            .source
    }
}

/// `argmax_j NPDC_{j->i}`; ties go to the lexicographically smallest symbol.
pub fn argmax_source(candidates: &[(String, f64)]) -> Result<(String, f64)> {
    let mut best: Option<&(String, f64)> = None;
    for c in candidates {
        if !c.1.is_finite() {
            return Err(Error::invalid(format!("NPDC for {} is not finite", c.0)));
        }
        best = match best {
            None => Some(c),
            Some(b) if c.1 > b.1 || (c.1 == b.1 && c.0 < b.0) => Some(c),
            keep => keep,
        };
    }
    best.cloned().ok_or_else(|| Error::invalid("empty candidate set for source selection"))
}

/// Build the per-state source map from `NPDC_{j->target}` vectors keyed by quantile.
pub fn select_sources(
    npdc_by_quantile: &[(f64, Vec<(String, f64)>)],
    target: &str,
    cfg: &StateConfig,
) -> Result<SourceMap> {
    cfg.validate()?;
    let mut sources = Vec::with_capacity(3);
    for state in MarketState::ALL {
        let tau = cfg.tau_for(state);
        let (_, cands) = npdc_by_quantile
            .iter()
            .find(|(t, _)| (t - tau).abs() < 1e-12)
            .ok_or(Error::MissingQuantile(tau))?;
        let filtered: Vec<(String, f64)> = cands.iter().filter(|(s, _)| s != target).cloned().collect();
        let (source, npdc) = argmax_source(&filtered)?;
        sources.push(SourceChoice {
            state,
            tau,
            source,
            npdc,
        });
    }
    Ok(SourceMap {
        target: target.to_string(),
        sources,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub date: NaiveDate,
    pub state: MarketState,
    pub source: String,
    pub value: f64,
}

/// `X_t = V_{j*(state_t), t-1}`; starts on the panel's second day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverFeatureSeries {
    pub target: String,
    pub rows: Vec<FeatureRow>,
}

impl SpilloverFeatureSeries {
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn value_on(&self, date: NaiveDate) -> Option<f64> {
        self.rows
            .binary_search_by_key(&date, |r| r.date)
            .ok()
            .map(|i| self.rows[i].value)
    }
}

/// `states.labels` must be aligned with `source_panel.days`.
pub fn build_spillover_feature(
    source_panel: &MeasurePanel,
    states: &StateLabelSeries,
    sources: &SourceMap,
) -> Result<SpilloverFeatureSeries> {
    if states.labels.len() != source_panel.n_days() {
        return Err(Error::Shape(format!(
            "{} state labels for {} panel days",
            states.labels.len(),
            source_panel.n_days()
        )));
    }
    let mut idx = [0usize; 3];
    for (k, state) in MarketState::ALL.iter().enumerate() {
        let s = sources.source_for(*state);
        if s == sources.target {
            return Err(Error::invalid(format!("source for {state} equals the target {s}")));
        }
        idx[k] = source_panel
            .asset_index(s)
            .ok_or_else(|| Error::MissingAsset(s.to_string()))?;
    }
    let rows = (1..source_panel.n_days())
        .map(|t| {
            let state = states.labels[t];
            let k = MarketState::ALL.iter().position(|s| *s == state).unwrap();
            FeatureRow {
                date: source_panel.days[t],
                state,
                source: source_panel.assets[idx[k]].clone(),
                value: source_panel.values[idx[k]][t - 1],
            }
        })
        .collect();
    Ok(SpilloverFeatureSeries {
        target: sources.target.clone(),
        rows,
    })
}
