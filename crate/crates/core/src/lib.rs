//! Volatility spillover measurement and state-adaptive HAR forecasting.
//!
//! Pipeline: intraday returns -> realized measures -> TVP quantile VAR spillovers ->
//! state-adaptive source feature -> Log-HAR family fits -> rolling out-of-sample
//! evaluation (losses, model confidence set, out-of-sample R^2).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod evaluation;
pub mod garch;
pub mod har;
pub mod io;
pub mod measures;
pub mod numeric;
pub mod spillover;
pub mod state;
pub mod synthetic;

pub use error::{Error, Result};
pub use evaluation::{ForecastContext, ForecastRun, McsConfig, McsResult, OosR2Result, Scheme};
pub use garch::{GarchFit, GarchKind};
pub use har::{HarData, HarDesign, HarFamily, HarFit, HarSpec};
pub use measures::{MeasureKind, MeasurePanel, MeasureParams, ReturnPanel};
pub use spillover::{QvarSpec, SpilloverMatrix, SpilloverSeries, TvpMode};
pub use state::{MarketState, SourceMap, SpilloverFeatureSeries, StateConfig, StateLabelSeries};
pub use synthetic::{DgpConfig, GroundTruth};
