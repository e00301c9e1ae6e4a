//! Out-of-sample forecasting harness and forecast comparison statistics.

mod forecast;
mod loss;
mod mcs;
mod models;
mod oos;

pub use forecast::{rolling_forecast, Forecast, ForecastRun, Forecaster, Scheme};
pub use loss::{loss_suite, per_date_loss, qlike, LossFunction, LossOptions, LossReport, LossScale, LossSummary};
pub use mcs::{mcs, superior_set_counts, McsConfig, McsOutcome, McsResult, McsStatistic};
pub use models::{ForecastContext, GarchForecaster, HarForecaster};
pub use oos::{r2_oos, OosR2Result};
