//! Time-varying parameter quantile VAR estimation.
//!
//! Two estimators feed the same downstream decomposition:
//!
//! * `ForgettingKalman`: per quantile and equation, a forgetting-factor recursive
//!   least-squares filter whose observation weights are the IRLS check-loss weights of
//!   the one-step prediction residual. The state covariance is inflated by `1/kappa`
//!   each step. At scheduled refresh points (first emitted row, every
//!   `refresh_every` rows, and the last row) the coefficients are re-solved exactly
//!   as the minimizer of the `kappa`-discounted check loss over all rows seen so far,
//!   and the filter covariance is reset to match.
//! * `RollingWindow`: an independent quantile regression on each trailing window.
//!
//! Residual covariances are exponentially weighted (decay `kappa`) in the first mode
//! and window sample covariances in the second.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::qreg::{asymmetry, fit_weighted_quantile_regression, validate_tau, IrlsOptions};
use crate::error::{Error, Result};
use crate::measures::MeasurePanel;
use crate::numeric::LOG_OFFSET;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvpMode {
    ForgettingKalman,
    RollingWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QvarSpec {
    pub lag_order: usize,
    pub quantiles: Vec<f64>,
    pub horizon: usize,
    pub tvp_mode: TvpMode,
    pub forgetting: f64,
    pub window: usize,
    /// Rows between exact re-solves in `forgetting_kalman` mode.
    pub refresh_every: usize,
    pub log_offset: f64,
}

impl Default for QvarSpec {
    fn default() -> Self {
        Self {
            lag_order: 1,
            quantiles: vec![0.05, 0.10, 0.50, 0.90, 0.95],
            horizon: 10,
            tvp_mode: TvpMode::ForgettingKalman,
            forgetting: 0.99,
            window: 200,
            refresh_every: 50,
            log_offset: LOG_OFFSET,
        }
    }
}

impl QvarSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lag_order == 0 {
            return Err(Error::invalid("lag order must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("forecast horizon must be at least 1"));
        }
        if self.quantiles.is_empty() {
            return Err(Error::invalid("at least one quantile is required"));
        }
        for &t in &self.quantiles {
            validate_tau(t)?;
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::invalid(format!("forgetting factor {} outside (0, 1]", self.forgetting)));
        }
        if self.tvp_mode == TvpMode::RollingWindow && self.window < 2 {
            return Err(Error::invalid("rolling window must hold at least two rows"));
        }
        if self.refresh_every == 0 {
            return Err(Error::invalid("refresh_every must be positive"));
        }
        Ok(())
    }

    /// Rows processed before the first emitted fit: `max(50, 5 N p)`.
    pub fn burn_in(&self, n_assets: usize) -> usize {
        50.max(5 * n_assets * self.lag_order)
    }

    pub fn min_days(&self, n_assets: usize) -> usize {
        self.burn_in(n_assets) + self.lag_order
    }
}

/// VAR parameters at one (time, quantile).
#[derive(Debug, Clone, PartialEq)]
pub struct QvarStep {
    pub intercept: DVector<f64>,
    /// `A_1..A_p`; row `i` of each matrix belongs to equation `i`.
    pub lags: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QvarFit {
    pub assets: Vec<String>,
    pub quantiles: Vec<f64>,
    pub lag_order: usize,
    /// Dates of the emitted steps.
    pub dates: Vec<NaiveDate>,
    /// `paths[q][t]`
    pub paths: Vec<Vec<QvarStep>>,
}

impl QvarFit {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn quantile_index(&self, tau: f64) -> Result<usize> {
        self.quantiles
            .iter()
            .position(|q| (q - tau).abs() < 1e-12)
            .ok_or(Error::MissingQuantile(tau))
    }
}

/// Lagged design `[1, y_{t-1}', ..., y_{t-p}']` and targets for rows `t = p..T`.
pub(crate) fn var_design(levels: &[Vec<f64>], p: usize) -> (DMatrix<f64>, Vec<Vec<f64>>) {
    let n = levels[0].len();
    let rows = levels.len() - p;
    let k = 1 + n * p;
    let x = DMatrix::from_fn(rows, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / n + 1;
            let var = (c - 1) % n;
            levels[r + p - lag][var]
        }
    });
    let y = (0..n).map(|i| (0..rows).map(|r| levels[r + p][i]).collect()).collect();
    (x, y)
}

fn coefficient_path_forgetting(
    x: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    spec: &QvarSpec,
    first_emit: usize,
) -> Result<Vec<DVector<f64>>> {
    let (rows, k) = (x.nrows(), x.ncols());
    let kappa = spec.forgetting;
    let mut b = DVector::<f64>::zeros(k);
    let mut p = DMatrix::<f64>::identity(k, k) * 10.0;
    let mut scale: Option<f64> = None;
    let mut path = Vec::with_capacity(rows);
    for r in 0..rows {
        let xr = x.row(r).transpose();
        p /= kappa;
        let e = y[r] - xr.dot(&b);
        let s = *scale.get_or_insert(e.abs().max(1e-8));
        let eps = (0.1 * s).max(1e-8);
        let w = asymmetry(e, tau) / e.abs().max(eps);
        let px = &p * &xr;
        let denom = 1.0 / w + xr.dot(&px);
        let gain = &px / denom;
        b += &gain * e;
        p -= &gain * px.transpose();
        p = (&p + p.transpose()) * 0.5;
        scale = Some(0.95 * s + 0.05 * e.abs());

        let due = r == first_emit
            || r + 1 == rows
            || (r > first_emit && (r - first_emit).is_multiple_of(spec.refresh_every));
        if due && r + 1 > k {
            let m = r + 1;
            let xs = x.rows(0, m).into_owned();
            let ow: Vec<f64> = (0..m).map(|s| kappa.powi((r - s) as i32)).collect();
            let fit = fit_weighted_quantile_regression(
                &xs,
                &y[..m],
                Some(&ow),
                tau,
                Some(b.as_slice()),
                IrlsOptions::default(),
            )?;
            b = DVector::from_vec(fit.coef);
            // reset the filter covariance to the discounted IRLS information matrix at `b`
            let resid: Vec<f64> = (0..m).map(|s| y[s] - x.row(s).transpose().dot(&b)).collect();
            let wsum: f64 = ow.iter().sum();
            let sc = resid.iter().zip(&ow).map(|(u, w)| u.abs() * w).sum::<f64>() / wsum;
            let eps = (0.1 * sc).max(1e-8);
            let mut info = DMatrix::<f64>::zeros(k, k);
            for s in 0..m {
                let ws = ow[s] * asymmetry(resid[s], tau) / resid[s].abs().max(eps);
                let xs_row = x.row(s);
                info += xs_row.transpose() * xs_row * ws;
            }
            if let Some(inv) = info.try_inverse() {
                p = (&inv + inv.transpose()) * 0.5;
            }
            scale = Some(sc.max(1e-8));
        }
        path.push(b.clone());
    }
    Ok(path)
}

fn coefficient_path_rolling(
    x: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    window: usize,
    first_emit: usize,
) -> Result<Vec<DVector<f64>>> {
    let rows = x.nrows();
    let mut path = vec![DVector::zeros(x.ncols()); rows];
    let mut prev: Option<Vec<f64>> = None;
    for r in first_emit..rows {
        let start = (r + 1).saturating_sub(window);
        let xs = x.rows(start, r + 1 - start).into_owned();
        let fit = fit_weighted_quantile_regression(
            &xs,
            &y[start..=r],
            None,
            tau,
            prev.as_deref(),
            IrlsOptions::default(),
        )?;
        path[r] = DVector::from_column_slice(&fit.coef);
        prev = Some(fit.coef);
    }
    Ok(path)
}

/// Covariance of rows of `resid` (each of length N).
fn sample_cov(resid: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = resid[0].len();
    let m = resid.len() as f64;
    let mean = resid.iter().fold(DVector::zeros(n), |a, r| a + r) / m;
    let mut cov = DMatrix::zeros(n, n);
    for r in resid {
        let d = r - &mean;
        cov += &d * d.transpose();
    }
    (mean, cov / (m - 1.0).max(1.0))
}

fn finalize_sigma(mut s: DMatrix<f64>) -> DMatrix<f64> {
    s = (&s + s.transpose()) * 0.5;
    for i in 0..s.nrows() {
        if !(s[(i, i)] > 1e-12) {
            s[(i, i)] = 1e-12;
        }
    }
    s
}

/// Estimate the time-varying quantile VAR on `ln(V + delta)` of the panel.
pub fn fit_tvp_qvar(panel: &MeasurePanel, spec: &QvarSpec) -> Result<QvarFit> {
    spec.validate()?;
    let n = panel.assets.len();
    if n == 0 {
        return Err(Error::invalid("empty measure panel"));
    }
    let needed = spec.min_days(n);
    if panel.n_days() < needed {
        return Err(Error::InsufficientData {
            what: "TVP-QVAR estimation".into(),
            needed,
            got: panel.n_days(),
        });
    }
    let levels = panel.log_rows(spec.log_offset);
    if levels.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value after log transform"));
    }
    let p = spec.lag_order;
    let (x, ys) = var_design(&levels, p);
    let rows = x.nrows();
    let burn = spec.burn_in(n);
    let first_emit = burn - 1;

    let jobs: Vec<(usize, usize)> = (0..spec.quantiles.len()).flat_map(|q| (0..n).map(move |i| (q, i))).collect();
    let coef_paths: Vec<Vec<DVector<f64>>> = jobs
        .par_iter()
        .map(|&(q, i)| {
            let tau = spec.quantiles[q];
            match spec.tvp_mode {
                TvpMode::ForgettingKalman => coefficient_path_forgetting(&x, &ys[i], tau, spec, first_emit),
                TvpMode::RollingWindow => coefficient_path_rolling(&x, &ys[i], tau, spec.window, first_emit),
            }
        })
        .collect::<Result<_>>()?;

    let mut paths = Vec::with_capacity(spec.quantiles.len());
    for q in 0..spec.quantiles.len() {
        let eq = &coef_paths[q * n..(q + 1) * n];
        let coef_at = |r: usize| -> DMatrix<f64> {
            DMatrix::from_fn(n, x.ncols(), |i, c| eq[i][r][c])
        };
        let residual = |r: usize, b: &DMatrix<f64>| -> DVector<f64> {
            let xr = x.row(r).transpose();
            DVector::from_fn(n, |i, _| ys[i][r] - b.row(i).transpose().dot(&xr))
        };
        let mut steps = Vec::with_capacity(rows - first_emit);
        // residual covariance state for the forgetting mode
        let b0 = coef_at(first_emit);
        let init: Vec<DVector<f64>> = (0..=first_emit).map(|r| residual(r, &b0)).collect();
        let (mut mean, mut cov) = sample_cov(&init);
        let mut weight = init.len() as f64;
        for r in first_emit..rows {
            let b = coef_at(r);
            let sigma = match spec.tvp_mode {
                TvpMode::ForgettingKalman => {
                    if r > first_emit {
                        let u = residual(r, &b);
                        weight = spec.forgetting * weight + 1.0;
                        let d_old = &u - &mean;
                        mean += &d_old / weight;
                        let d_new = &u - &mean;
                        cov += (&d_old * d_new.transpose() - &cov) / weight;
                    }
                    cov.clone()
                }
                TvpMode::RollingWindow => {
                    let start = (r + 1).saturating_sub(spec.window);
                    let res: Vec<DVector<f64>> = (start..=r).map(|s| residual(s, &b)).collect();
                    sample_cov(&res).1
                }
            };
            let intercept = b.column(0).into_owned();
            let lags = (0..p).map(|l| b.columns(1 + l * n, n).into_owned()).collect();
            steps.push(QvarStep {
                intercept,
                lags,
                sigma: finalize_sigma(sigma),
            });
        }
        paths.push(steps);
    }
    let dates = panel.days[p + first_emit..].to_vec();
    Ok(QvarFit {
        assets: panel.assets.clone(),
        quantiles: spec.quantiles.clone(),
        lag_order: p,
        dates,
        paths,
    })
}
