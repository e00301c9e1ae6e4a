//! Quantile VAR spillover estimation: TVP-QVAR fits, GFEVD tables and connectedness indices.

pub mod connectedness;
pub mod gfevd;
pub mod qreg;
pub mod tvp;

pub use connectedness::{
    connectedness, cyclicality, spillover_time_series, AveragedSpillover, ConnectednessSummary, SpilloverReport,
    SpilloverSeries,
};
pub use gfevd::{gfevd, ma_coefficients, spectral_radius, spillover_matrix, MaCoefficients, SpilloverMatrix};
pub use qreg::{check_loss, fit_quantile_regression, fit_weighted_quantile_regression, IrlsOptions, QuantileFit};
pub use tvp::{fit_tvp_qvar, QvarFit, QvarSpec, QvarStep, TvpMode};
