//! Pipeline stages. Each reads its upstream artifacts from the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::info;
use serde::{Deserialize, Serialize};
use volspill_core::evaluation::{
    loss_suite, mcs, per_date_loss, r2_oos, rolling_forecast, superior_set_counts, Forecaster, GarchForecaster,
    HarForecaster, LossFunction,
};
use volspill_core::garch::fit_garch;
use volspill_core::io::{self, ForecastPlotRecord, LossRecord, McsRatioRecord, McsRecord, R2Record};
use volspill_core::measures::build_measure_panel;
use volspill_core::measures::ingest::{read_ticks_file, returns_from_ticks, write_ticks};
use volspill_core::spillover::{cyclicality, fit_tvp_qvar, spillover_time_series};
use volspill_core::state::{build_spillover_feature, classify_states, select_sources};
use volspill_core::synthetic::{panel_to_ticks, simulate};
use volspill_core::{
    ForecastContext, ForecastRun, GarchFit, HarFit, McsConfig, McsResult, MeasureKind, MeasurePanel, Scheme, SourceMap,
};

use crate::config::{PipelineConfig, SchemeKind};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Artifact locations under the output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.root.join("ground_truth.json")
    }

    pub fn measure(&self, kind: MeasureKind) -> PathBuf {
        self.root.join("measures").join(format!("measures_{kind}.csv"))
    }

    pub fn daily_returns(&self) -> PathBuf {
        self.root.join("measures").join("daily_returns.csv")
    }

    fn spillover(&self, stem: &str, kind: MeasureKind, ext: &str) -> PathBuf {
        self.root.join("spillover").join(format!("{stem}_{kind}.{ext}"))
    }

    pub fn npdc_into(&self, target: &str, kind: MeasureKind) -> PathBuf {
        self.spillover(&format!("npdc_into_{target}"), kind, "json")
    }

    pub fn cyclicality(&self, target: &str) -> PathBuf {
        self.root.join("spillover").join(format!("cyclicality_{target}.csv"))
    }

    pub fn sources(&self, target: &str) -> PathBuf {
        self.root.join("features").join(format!("sources_{target}.json"))
    }

    pub fn feature(&self, target: &str, kind: MeasureKind) -> PathBuf {
        self.root.join("features").join(format!("sa_feature_{target}_{kind}.csv"))
    }

    pub fn forecast(&self, preset: &str, model: &str, h: usize) -> PathBuf {
        self.root
            .join("forecasts")
            .join(preset)
            .join(format!("forecasts_{}_{h}.csv", slug(model)))
    }

    pub fn evaluation(&self, preset: &str, file: &str) -> PathBuf {
        self.root.join("evaluation").join(preset).join(file)
    }

    pub fn plot(&self, file: &str) -> PathBuf {
        self.root.join("plots").join(file)
    }
}

/// File-name form of a model name: `GARCH(1,1)` -> `GARCH_1_1`.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::User(format!(
            "missing upstream file: {} (produced by `{producer}`)",
            path.display()
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyReturnRecord {
    pub date: NaiveDate,
    pub asset: String,
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicalityRecord {
    pub measure: MeasureKind,
    pub source: String,
    pub tau_low: f64,
    pub npdc_low: f64,
    pub tau_high: f64,
    pub npdc_high: f64,
    pub cyclicality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRecord {
    pub date: NaiveDate,
    pub tau: f64,
    pub asset: String,
    pub net: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub model: String,
    pub term: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStatsRecord {
    pub model: String,
    pub n_obs: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub aic: f64,
    pub bic: f64,
    pub residual_variance: f64,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InSampleFits {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub har: Vec<HarFit>,
    pub garch: Option<GarchFit>,
}

/// Mean `NPDC_{j -> target}` per quantile, as written by `spillover`.
pub type NpdcByQuantile = Vec<(f64, Vec<(String, f64)>)>;

pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<()> {
    let mut dgp = cfg
        .simulate
        .clone()
        .ok_or_else(|| CliError::User("simulate: the config has no `simulate` section".into()))?;
    dgp.seed = cfg.seed;
    let (panel, truth) = simulate(&dgp)?;
    let ticks = panel_to_ticks(&panel, dgp.start_price)?;
    let path = cfg.ticks_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = File::create(&path).map_err(|e| CliError::User(format!("cannot create {}: {e}", path.display())))?;
    write_ticks(BufWriter::new(file), &ticks)?;
    io::write_json(&Layout::new(&cfg.output_dir).ground_truth(), &truth)?;
    info!("simulated {} ticks into {}", ticks.len(), path.display());
    Ok(())
}

pub fn cmd_measures(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    let path = cfg.ticks_path();
    require(&path, "simulate or an input tick file")?;
    let ticks = read_ticks_file(&path)?;
    let mut panel = returns_from_ticks(&ticks, cfg.interval_secs)?;
    if !cfg.assets.is_empty() {
        panel = panel.select(&cfg.assets)?;
    }
    if panel.asset_index(&cfg.target).is_none() {
        return Err(CliError::User(format!("target: `{}` not found in {}", cfg.target, path.display())));
    }
    info!("{} assets over {} days", panel.assets().len(), panel.days().len());
    for kind in &cfg.measures.kinds {
        let m = build_measure_panel(&panel, *kind, &cfg.measures.params)?;
        io::write_measure_file(&layout.measure(*kind), &m)?;
    }
    let mut rets = Vec::new();
    for (a, asset) in panel.assets().iter().enumerate() {
        for (d, r) in panel.daily_returns(a).into_iter().enumerate() {
            rets.push(DailyReturnRecord {
                date: panel.days()[d],
                asset: asset.clone(),
                ret: r,
            });
        }
    }
    io::write_csv(&layout.daily_returns(), &rets)?;
    Ok(())
}

fn load_measure(layout: &Layout, kind: MeasureKind) -> Result<MeasurePanel> {
    let path = layout.measure(kind);
    require(&path, "measures")?;
    Ok(io::read_measure_file(&path, kind)?)
}

pub fn cmd_spillover(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    let mut cyc = Vec::new();
    for kind in &cfg.measures.kinds {
        let panel = load_measure(&layout, *kind)?;
        let target = panel
            .asset_index(&cfg.target)
            .ok_or_else(|| CliError::User(format!("target: `{}` not in the {kind} panel", cfg.target)))?;
        let fit = fit_tvp_qvar(&panel, &cfg.qvar)?;
        let series = spillover_time_series(&fit, cfg.qvar.horizon)?;
        info!("{kind}: spillover tables for {} days", series.dates.len());
        io::write_csv(&layout.spillover("spillover_tsi", *kind, "csv"), &io::tsi_records(&series))?;
        io::write_csv(&layout.spillover("spillover_index", *kind, "csv"), &io::index_records(&series))?;
        io::write_csv(&layout.spillover("spillover_pairs", *kind, "csv"), &io::pair_records(&series))?;
        io::write_json(&layout.spillover("spillover_summary", *kind, "json"), &series.report())?;

        let npdc: NpdcByQuantile = series
            .quantiles
            .iter()
            .map(|t| Ok((*t, series.mean_npdc_into(target, *t)?)))
            .collect::<volspill_core::Result<_>>()?;
        io::write_json(&layout.npdc_into(&cfg.target, *kind), &npdc)?;
        let (lo, hi) = (cfg.state.tau_low, cfg.state.tau_high);
        for source in series.assets.iter().enumerate().filter(|(j, _)| *j != target).map(|(_, s)| s) {
            let at = |tau: f64| {
                npdc.iter()
                    .find(|(t, _)| (t - tau).abs() < 1e-12)
                    .map(|(_, v)| v.iter().find(|(s, _)| s == source).map_or(f64::NAN, |x| x.1))
            };
            let (Some(vl), Some(vh)) = (at(lo), at(hi)) else { continue };
            cyc.push(CyclicalityRecord {
                measure: *kind,
                source: source.clone(),
                tau_low: lo,
                npdc_low: vl,
                tau_high: hi,
                npdc_high: vh,
                cyclicality: cyclicality(&[(lo, vl), (hi, vh)], lo, hi)?,
            });
        }

        io::write_tsv(&layout.plot(&format!("tsi_{kind}.tsv")), &io::tsi_records(&series))?;
        let net: Vec<NetRecord> = io::index_records(&series)
            .into_iter()
            .map(|r| NetRecord {
                date: r.date,
                tau: r.tau,
                asset: r.asset,
                net: r.net,
            })
            .collect();
        io::write_tsv(&layout.plot(&format!("net_{kind}.tsv")), &net)?;
    }
    io::write_csv(&layout.cyclicality(&cfg.target), &cyc)?;
    Ok(())
}

pub fn cmd_features(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    let mut maps: BTreeMap<String, SourceMap> = BTreeMap::new();
    for kind in &cfg.measures.kinds {
        let path = layout.npdc_into(&cfg.target, *kind);
        require(&path, "spillover")?;
        let npdc: NpdcByQuantile = io::read_json(&path)?;
        let map = select_sources(&npdc, &cfg.target, &cfg.state)?;
        let panel = load_measure(&layout, *kind)?;
        let states = classify_states(panel.series_by_name(&cfg.target)?, &cfg.state)?;
        if states.thresholds.degenerate {
            log::warn!("{kind}: {} state thresholds coincide; every day is Normal", cfg.target);
        }
        let feature = build_spillover_feature(&panel, &states, &map)?;
        io::write_csv(&layout.feature(&cfg.target, *kind), &io::feature_records(&feature))?;
        maps.insert(kind.to_string(), map);
    }
    io::write_json(&layout.sources(&cfg.target), &maps)?;
    Ok(())
}

/// Forecasting context over every measure the models need.
fn context(cfg: &PipelineConfig, layout: &Layout) -> Result<ForecastContext> {
    let specs = cfg.model_specs()?;
    let kinds: BTreeSet<MeasureKind> = specs
        .iter()
        .flat_map(|s| s.family.kinds().iter().copied())
        .chain([MeasureKind::Rv])
        .collect();
    let panels = kinds
        .into_iter()
        .map(|k| Ok((k, load_measure(layout, k)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut ctx = ForecastContext::new(&cfg.target, panels, &cfg.qvar, cfg.state, cfg.source_refit_every)?;
    ctx.log_offset = specs.first().map_or(ctx.log_offset, |s| s.log_offset);
    if cfg.benchmark.is_some() {
        let path = layout.daily_returns();
        require(&path, "measures")?;
        let recs: Vec<DailyReturnRecord> = io::read_csv(&path)?;
        let by_date: BTreeMap<NaiveDate, f64> = recs
            .into_iter()
            .filter(|r| r.asset == cfg.target)
            .map(|r| (r.date, r.ret))
            .collect();
        let r = ctx
            .dates
            .iter()
            .map(|d| {
                by_date
                    .get(d)
                    .copied()
                    .ok_or_else(|| CliError::User(format!("{}: no return for {} on {d}", path.display(), cfg.target)))
            })
            .collect::<Result<Vec<f64>>>()?;
        ctx = ctx.with_daily_returns(r)?;
    }
    Ok(ctx)
}

/// Estimation window for a preset: every day before the first forecast at the longest horizon.
fn scheme_for(cfg: &PipelineConfig, n: usize, span: usize, window: Option<usize>) -> Result<Scheme> {
    let h_max = *cfg.evaluation.horizons.iter().max().expect("validated horizons");
    let w = match window {
        Some(w) => w,
        None => (n + 1)
            .checked_sub(span + h_max)
            .filter(|w| *w > 0)
            .ok_or_else(|| CliError::User(format!("{n} days cannot hold {span} forecasts at horizon {h_max}")))?,
    };
    Ok(match cfg.evaluation.scheme {
        SchemeKind::Rolling => Scheme::RollingFixed { window: w },
        SchemeKind::Expanding => Scheme::Expanding { initial: w },
    })
}

pub fn cmd_fit(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    let ctx = context(cfg, &layout)?;
    let n = ctx.n_days();
    let span = cfg.evaluation.presets[0].span;
    let end = n
        .checked_sub(span)
        .filter(|e| *e > 0)
        .ok_or_else(|| CliError::User(format!("evaluation.presets: span {span} leaves no in-sample days")))?;
    let mut har = Vec::new();
    let mut coefs = Vec::new();
    let mut stats = Vec::new();
    for spec in cfg.model_specs()? {
        let fit = HarForecaster::new(spec, &ctx).fit(0, end, 1)?;
        coefs.push(CoefficientRecord {
            model: fit.model.clone(),
            term: "intercept".into(),
            estimate: fit.intercept,
            std_error: fit.intercept_std_error,
        });
        for t in &fit.terms {
            coefs.push(CoefficientRecord {
                model: fit.model.clone(),
                term: t.column.to_string(),
                estimate: t.estimate,
                std_error: t.std_error,
            });
        }
        stats.push(FitStatsRecord {
            model: fit.model.clone(),
            n_obs: fit.n_obs,
            r_squared: fit.r_squared,
            adj_r_squared: fit.adj_r_squared,
            aic: fit.aic,
            bic: fit.bic,
            residual_variance: fit.residual_variance,
            lambda: fit.lambda,
        });
        har.push(fit);
    }
    let garch = match (cfg.benchmark, &ctx.daily_returns) {
        (Some(kind), Some(r)) => Some(fit_garch(&r[..end], kind)?),
        _ => None,
    };
    let fits = InSampleFits {
        start: ctx.dates[0],
        end: ctx.dates[end - 1],
        har,
        garch,
    };
    io::write_json(&layout.root.join("fit").join("fits.json"), &fits)?;
    io::write_csv(&layout.root.join("fit").join("coefficients.csv"), &coefs)?;
    io::write_csv(&layout.root.join("fit").join("statistics.csv"), &stats)?;
    Ok(())
}

pub fn cmd_forecast(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    let ctx = context(cfg, &layout)?;
    let y = ctx.log_target();
    let mut models: Vec<Box<dyn Forecaster + '_>> = cfg
        .model_specs()?
        .into_iter()
        .map(|s| Box::new(HarForecaster::new(s, &ctx)) as Box<dyn Forecaster + '_>)
        .collect();
    if let Some(kind) = cfg.benchmark {
        models.push(Box::new(GarchForecaster { kind, ctx: &ctx }));
    }
    for preset in &cfg.evaluation.presets {
        let scheme = scheme_for(cfg, ctx.n_days(), preset.span, preset.window)?;
        for &h in &cfg.evaluation.horizons {
            for model in &models {
                let run = rolling_forecast(model.as_ref(), &ctx.dates, &y, scheme, preset.span, h)?;
                info!(
                    "{} {} h={h}: {} forecasts, {} failed",
                    preset.name,
                    run.model,
                    run.len(),
                    run.failures.len()
                );
                io::write_csv(&layout.forecast(&preset.name, &run.model, h), &io::forecast_records(&run))?;
            }
        }
    }
    Ok(())
}

fn load_run(layout: &Layout, preset: &str, model: &str, h: usize, scheme: Scheme) -> Result<ForecastRun> {
    let path = layout.forecast(preset, model, h);
    require(&path, "forecast")?;
    let recs: Vec<io::ForecastRecord> = io::read_csv(&path)?;
    Ok(io::run_from_records(model, h, scheme, &recs)?)
}

/// Per-model losses on the dates where every model has a valid loss.
fn aligned_losses(runs: &[ForecastRun], loss: LossFunction, cfg: &PipelineConfig) -> Vec<Vec<f64>> {
    let per_model: Vec<BTreeMap<NaiveDate, f64>> = runs
        .iter()
        .map(|run| {
            run.dates
                .iter()
                .zip(per_date_loss(run, loss, &cfg.evaluation.loss))
                .filter_map(|(d, l)| l.ok().map(|v| (*d, v)))
                .collect()
        })
        .collect();
    let common: Vec<NaiveDate> = per_model[0]
        .keys()
        .filter(|d| per_model.iter().all(|m| m.contains_key(d)))
        .copied()
        .collect();
    per_model.iter().map(|m| common.iter().map(|d| m[d]).collect()).collect()
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<()> {
    let layout = Layout::new(&cfg.output_dir);
    let names = cfg.forecast_models();
    let mcs_cfg = McsConfig {
        alpha: cfg.evaluation.mcs.alpha,
        bootstrap: cfg.evaluation.mcs.bootstrap,
        block_len: cfg.evaluation.mcs.block_len,
        seed: cfg.seed,
    };
    let bench_idx = names
        .iter()
        .position(|m| *m == cfg.evaluation.r2_benchmark)
        .expect("validated benchmark");
    for preset in &cfg.evaluation.presets {
        // the scheme is only carried along; forecasts are read from disk
        let scheme = Scheme::RollingFixed { window: preset.window.unwrap_or(0) };
        let mut r2 = Vec::new();
        for &h in &cfg.evaluation.horizons {
            let runs = names
                .iter()
                .map(|m| load_run(&layout, &preset.name, m, h, scheme))
                .collect::<Result<Vec<_>>>()?;
            let losses: Vec<LossRecord> = runs
                .iter()
                .map(|run| {
                    let s = loss_suite(run, &cfg.evaluation.loss).summary;
                    LossRecord {
                        model: run.model.clone(),
                        horizon: h,
                        mse: s.mse,
                        mae: s.mae,
                        rmse: s.rmse,
                        qlike: s.qlike,
                        n: s.n,
                    }
                })
                .collect();
            io::write_csv(&layout.evaluation(&preset.name, &format!("losses_{h}.csv")), &losses)?;

            let mut results: Vec<McsResult> = Vec::new();
            let mut records = Vec::new();
            for loss in LossFunction::ALL {
                let matrix = aligned_losses(&runs, loss, cfg);
                let res = mcs(&matrix, &names, &mcs_cfg)
                    .map_err(|e| CliError::User(format!("{} h={h} {loss:?}: {e}", preset.name)))?;
                for (i, model) in names.iter().enumerate() {
                    records.push(McsRecord {
                        model: model.clone(),
                        loss: loss.label().to_string(),
                        tmax_rank: res.t_max.ranks[i],
                        tr_rank: res.t_r.ranks[i],
                        tmax_pvalue: res.t_max.p_values[i],
                        tr_pvalue: res.t_r.p_values[i],
                        survived_tmax: res.t_max.survivors[i],
                        survived_tr: res.t_r.survivors[i],
                    });
                }
                results.push(res);
            }
            io::write_csv(&layout.evaluation(&preset.name, &format!("mcs_{h}.csv")), &records)?;
            let refs: Vec<&McsResult> = results.iter().collect();
            let ratios: Vec<McsRatioRecord> = superior_set_counts(&refs)
                .into_iter()
                .zip(&names)
                .map(|((s, t), m)| McsRatioRecord {
                    model: m.clone(),
                    superior: s,
                    tests: t,
                    ratio: format!("{s}/{t}"),
                })
                .collect();
            io::write_csv(&layout.evaluation(&preset.name, &format!("mcs_ratio_{h}.csv")), &ratios)?;

            let bench = &runs[bench_idx];
            for run in runs.iter().filter(|r| r.model != bench.model) {
                let common: Vec<NaiveDate> =
                    run.dates.iter().filter(|d| bench.dates.binary_search(d).is_ok()).copied().collect();
                let (m, b) = (run.restrict(&common), bench.restrict(&common));
                match r2_oos(&m.targets, &m.predictions, &b.predictions, h) {
                    Ok(res) => r2.push(R2Record {
                        model: run.model.clone(),
                        horizon: h,
                        benchmark: bench.model.clone(),
                        r2_oos: res.r2_oos,
                        mspe_adjust: res.mspe_adjust,
                        cw_stat: res.cw_stat,
                        p_value: res.p_value,
                        n: res.n,
                    }),
                    Err(e) => log::warn!("{} h={h}: R2oos skipped: {e}", run.model),
                }
            }

            let plot: Vec<ForecastPlotRecord> = runs
                .iter()
                .flat_map(|run| {
                    (0..run.len()).map(|t| ForecastPlotRecord {
                        date: run.dates[t],
                        model: run.model.clone(),
                        prediction: run.predictions[t],
                        target: run.targets[t],
                    })
                })
                .collect();
            io::write_tsv(&layout.plot(&format!("forecasts_{}_{h}.tsv", preset.name)), &plot)?;
        }
        io::write_csv(&layout.evaluation(&preset.name, "r2oos.csv"), &r2)?;
    }
    Ok(())
}

pub fn cmd_run_all(cfg: &PipelineConfig) -> Result<()> {
    if cfg.simulate.is_some() {
        cmd_simulate(cfg)?;
    }
    cmd_measures(cfg)?;
    cmd_spillover(cfg)?;
    cmd_features(cfg)?;
    cmd_fit(cfg)?;
    cmd_forecast(cfg)?;
    cmd_evaluate(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("GARCH(1,1)"), "GARCH_1_1");
        assert_eq!(slug("Lasso-SA-Log-HAR-RS"), "Lasso-SA-Log-HAR-RS");
    }
}
