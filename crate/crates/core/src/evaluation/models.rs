use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use chrono::NaiveDate;
use rayon::prelude::*;

use super::{Forecast, Forecaster};
use crate::error::{Error, Result};
use crate::garch::{fit_garch, garch_forecast, GarchKind};
use crate::har::{build_har_design, fit_har, HarData, HarFit, HarSpec};
use crate::measures::{MeasureKind, MeasurePanel};
use crate::numeric::LOG_OFFSET;
use crate::spillover::{fit_tvp_qvar, spillover_time_series, QvarSpec};
use crate::state::{build_spillover_feature, classify_states, select_sources, SourceMap, StateConfig};

type SourceKey = (MeasureKind, usize, usize);

/// Shared inputs for window-by-window re-estimation of the target's models.
pub struct ForecastContext {
    pub target: String,
    pub dates: Vec<NaiveDate>,
    pub panels: BTreeMap<MeasureKind, MeasurePanel>,
    /// The target's daily returns, for the GARCH benchmark.
    pub daily_returns: Option<Vec<f64>>,
    pub qvar: QvarSpec,
    pub state: StateConfig,
    /// Re-estimate source maps only on days divisible by this (1 = every window).
    pub source_refit_every: usize,
    pub log_offset: f64,
    target_index: usize,
    sources: Mutex<HashMap<SourceKey, std::result::Result<SourceMap, String>>>,
}

impl ForecastContext {
    pub fn new(
        target: &str,
        panels: BTreeMap<MeasureKind, MeasurePanel>,
        qvar: &QvarSpec,
        state: StateConfig,
        source_refit_every: usize,
    ) -> Result<Self> {
        state.validate()?;
        let rv = panels
            .get(&MeasureKind::Rv)
            .ok_or_else(|| Error::invalid("forecasting needs the RV panel"))?;
        let target_index = rv.asset_index(target).ok_or_else(|| Error::MissingAsset(target.to_string()))?;
        for p in panels.values() {
            if p.days != rv.days || p.assets != rv.assets {
                return Err(Error::Shape(format!("{} panel is not aligned with the RV panel", p.kind)));
            }
        }
        if rv.assets.len() < 2 {
            return Err(Error::invalid("spillover sources need at least two assets"));
        }
        if source_refit_every == 0 {
            return Err(Error::invalid("source_refit_every must be positive"));
        }
        let mut taus = vec![state.tau_low, state.tau_mid, state.tau_high];
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        let qvar = QvarSpec {
            quantiles: taus,
            ..qvar.clone()
        };
        qvar.validate()?;
        Ok(Self {
            target: target.to_string(),
            dates: rv.days.clone(),
            panels,
            daily_returns: None,
            log_offset: LOG_OFFSET,
            qvar,
            state,
            source_refit_every,
            target_index,
            sources: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_daily_returns(mut self, r: Vec<f64>) -> Result<Self> {
        if r.len() != self.dates.len() {
            return Err(Error::Shape("daily returns are not aligned with the panels".into()));
        }
        self.daily_returns = Some(r);
        Ok(self)
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    /// `ln(RV + delta)` of the target.
    pub fn log_target(&self) -> Vec<f64> {
        self.panels[&MeasureKind::Rv].values[self.target_index]
            .iter()
            .map(|v| (v + self.log_offset).ln())
            .collect()
    }

    fn panel(&self, kind: MeasureKind) -> Result<&MeasurePanel> {
        self.panels
            .get(&kind)
            .ok_or_else(|| Error::invalid(format!("{kind} panel not loaded")))
    }

    /// Estimation window used for the source map of a forecast from `start..end`.
    fn source_window(&self, start: usize, end: usize) -> (usize, usize) {
        let a = end - end % self.source_refit_every;
        let shift = end - a;
        let s = start.saturating_sub(shift);
        if a <= s || a - s < self.qvar.min_days(self.panels[&MeasureKind::Rv].assets.len()) {
            (start, end)
        } else {
            (s, a)
        }
    }

    fn estimate_sources(&self, kind: MeasureKind, start: usize, end: usize) -> Result<SourceMap> {
        let panel = self.panel(kind)?.slice_days(start, end);
        let fit = fit_tvp_qvar(&panel, &self.qvar)?;
        let series = spillover_time_series(&fit, self.qvar.horizon)?;
        let npdc = self
            .qvar
            .quantiles
            .iter()
            .map(|t| Ok((*t, series.mean_npdc_into(self.target_index, *t)?)))
            .collect::<Result<Vec<_>>>()?;
        select_sources(&npdc, &self.target, &self.state)
    }

    /// Per-state spillover sources for `kind`, estimated from days `start..end` only
    /// (or an earlier anchor window when `source_refit_every > 1`).
    pub fn sources(&self, kind: MeasureKind, start: usize, end: usize) -> Result<SourceMap> {
        let (s, e) = self.source_window(start, end);
        let key = (kind, s, e);
        if let Some(hit) = self.sources.lock().unwrap().get(&key) {
            return hit.clone().map_err(Error::InvalidInput);
        }
        let res = self
            .estimate_sources(kind, s, e)
            .map_err(|err| format!("spillover sources for {kind} on days {s}..{e}: {err}"));
        self.sources.lock().unwrap().entry(key).or_insert(res).clone().map_err(Error::InvalidInput)
    }

    fn prefetch_sources(&self, kinds: &[MeasureKind], windows: &[(usize, usize)]) {
        let keys: BTreeSet<(MeasureKind, usize, usize)> = windows
            .iter()
            .flat_map(|(s, e)| kinds.iter().map(move |k| (*k, *s, *e)))
            .collect();
        keys.into_par_iter().for_each(|(k, s, e)| {
            let _ = self.sources(k, s, e);
        });
    }

    /// HAR inputs over days `start..end`, with spillover features when `spec` needs them.
    pub fn har_data(&self, spec: &HarSpec, start: usize, end: usize) -> Result<HarData> {
        let rv = self.panel(MeasureKind::Rv)?;
        let mut data = HarData {
            dates: self.dates[start..end].to_vec(),
            rv: rv.values[self.target_index][start..end].to_vec(),
            ..HarData::default()
        };
        for kind in spec.family.kinds() {
            let panel = self.panel(*kind)?;
            let own = panel.values[self.target_index][start..end].to_vec();
            if spec.include_spillover {
                let map = self.sources(*kind, start, end)?;
                let states = classify_states(&own, &self.state)?;
                let window = panel.slice_days(start, end);
                let feat = build_spillover_feature(&window, &states, &map)?;
                let mut x = vec![None];
                x.extend(feat.rows.iter().map(|r| Some(r.value)));
                data.features.insert(*kind, x);
            }
            data.components.insert(*kind, own);
        }
        Ok(data)
    }
}

/// Log-HAR variant re-fitted on every window.
pub struct HarForecaster<'a> {
    pub spec: HarSpec,
    pub ctx: &'a ForecastContext,
}

impl<'a> HarForecaster<'a> {
    pub fn new(spec: HarSpec, ctx: &'a ForecastContext) -> Self {
        Self { spec, ctx }
    }

    fn fit_window(&self, data: &HarData, h: usize) -> Result<HarFit> {
        let design = build_har_design(data, &self.spec)?;
        let design = if h == 1 {
            design
        } else {
            let lrv: Vec<f64> = data.rv.iter().map(|v| (v + self.spec.log_offset).ln()).collect();
            design.with_horizon(&lrv, h)?
        };
        fit_har(&design, &self.spec)
    }

    /// In-sample fit of the `h`-day direct target on days `start..end`.
    pub fn fit(&self, start: usize, end: usize, h: usize) -> Result<HarFit> {
        let data = self.ctx.har_data(&self.spec, start, end)?;
        self.fit_window(&data, h)
    }
}

impl Forecaster for HarForecaster<'_> {
    fn name(&self) -> String {
        self.spec.name()
    }

    fn forecast(&self, start: usize, end: usize, h: usize) -> Result<Forecast> {
        let data = self.ctx.har_data(&self.spec, start, end)?;
        let fit = self.fit_window(&data, h)?;
        let row = data
            .regressors(&self.spec, data.len())?
            .ok_or_else(|| Error::invalid("spillover feature undefined at the forecast origin"))?;
        Ok(Forecast {
            value: fit.predict_row(&row)?,
            residual_variance: Some(fit.residual_variance),
        })
    }

    fn forecast_many(&self, windows: &[(usize, usize)], h: usize) -> Vec<Result<Forecast>> {
        if self.spec.include_spillover {
            self.ctx.prefetch_sources(self.spec.family.kinds(), windows);
        }
        windows.par_iter().map(|(s, e)| self.forecast(*s, *e, h)).collect()
    }
}

/// GARCH variance forecast mapped to the mean log target.
pub struct GarchForecaster<'a> {
    pub kind: GarchKind,
    pub ctx: &'a ForecastContext,
}

impl Forecaster for GarchForecaster<'_> {
    fn name(&self) -> String {
        match self.kind {
            GarchKind::Garch11 => "GARCH(1,1)".into(),
            GarchKind::Gjr => "GJR-GARCH".into(),
        }
    }

    fn forecast(&self, start: usize, end: usize, h: usize) -> Result<Forecast> {
        let r = self
            .ctx
            .daily_returns
            .as_ref()
            .ok_or_else(|| Error::invalid("GARCH benchmark needs daily returns"))?;
        let fit = fit_garch(&r[start..end], self.kind)?;
        let path = garch_forecast(&fit, h);
        Ok((path.iter().map(|v| (v + self.ctx.log_offset).ln()).sum::<f64>() / h as f64).into())
    }
}
