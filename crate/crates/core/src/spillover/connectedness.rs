//! Connectedness indices derived from a normalized spillover table.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gfevd::{spillover_matrix, SpilloverMatrix};
use super::tvp::QvarFit;
use crate::error::{Error, Result};

/// All indices in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessSummary {
    /// Total spillover index.
    pub tsi: f64,
    /// `S_{i<-.}`: received from all other assets.
    pub from_others: Vec<f64>,
    /// `S_{.<-i}`: transmitted to all other assets.
    pub to_others: Vec<f64>,
    /// `S_{i,net} = to - from`. Also reported as NSI.
    pub net: Vec<f64>,
    /// `npdc[i][j] = NPDC_{j->i} = 100 (theta_ij - theta_ji)`; positive when j is a net transmitter to i.
    pub npdc: Vec<Vec<f64>>,
}

impl ConnectednessSummary {
    /// Net spillover index; alias of [`Self::net`].
    pub fn nsi(&self) -> &[f64] {
        &self.net
    }
}

pub fn connectedness(theta: &SpilloverMatrix) -> ConnectednessSummary {
    let e = &theta.entries;
    let n = e.len();
    let mut from_others = vec![0.0; n];
    let mut to_others = vec![0.0; n];
    let mut off = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                from_others[i] += e[i][j];
                to_others[j] += e[i][j];
                off += e[i][j];
            }
        }
    }
    let from_others: Vec<f64> = from_others.into_iter().map(|v| 100.0 * v).collect();
    let to_others: Vec<f64> = to_others.into_iter().map(|v| 100.0 * v).collect();
    let net = to_others.iter().zip(&from_others).map(|(t, f)| t - f).collect();
    let npdc = (0..n)
        .map(|i| (0..n).map(|j| 100.0 * (e[i][j] - e[j][i])).collect())
        .collect();
    ConnectednessSummary {
        tsi: 100.0 * off / n as f64,
        from_others,
        to_others,
        net,
        npdc,
    }
}

/// `value(tau_high) - value(tau_low)` from `(tau, value)` pairs.
pub fn cyclicality(values: &[(f64, f64)], tau_low: f64, tau_high: f64) -> Result<f64> {
    let find = |tau: f64| {
        values
            .iter()
            .find(|(t, _)| (t - tau).abs() < 1e-12)
            .map(|(_, v)| *v)
            .ok_or(Error::MissingQuantile(tau))
    };
    Ok(find(tau_high)? - find(tau_low)?)
}

/// Spillover tables and indices along a fitted path, `[quantile][time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpilloverSeries {
    pub assets: Vec<String>,
    pub quantiles: Vec<f64>,
    pub horizon: usize,
    pub dates: Vec<NaiveDate>,
    pub matrices: Vec<Vec<SpilloverMatrix>>,
    pub summaries: Vec<Vec<ConnectednessSummary>>,
}

pub fn spillover_time_series(fit: &QvarFit, horizon: usize) -> Result<SpilloverSeries> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let per_q: Vec<(Vec<SpilloverMatrix>, Vec<ConnectednessSummary>)> = fit
        .paths
        .par_iter()
        .zip(&fit.quantiles)
        .map(|(path, &tau)| {
            let mats = path
                .iter()
                .zip(&fit.dates)
                .map(|(step, d)| spillover_matrix(&step.lags, &step.sigma, horizon, tau, Some(*d)))
                .collect::<Result<Vec<_>>>()?;
            let sums = mats.iter().map(connectedness).collect();
            Ok((mats, sums))
        })
        .collect::<Result<_>>()?;
    let (matrices, summaries) = per_q.into_iter().unzip();
    Ok(SpilloverSeries {
        assets: fit.assets.clone(),
        quantiles: fit.quantiles.clone(),
        horizon,
        dates: fit.dates.clone(),
        matrices,
        summaries,
    })
}

/// Time-averaged indices at one quantile; the table reported per quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedSpillover {
    pub tau: f64,
    pub tsi: f64,
    pub from_others: Vec<f64>,
    pub to_others: Vec<f64>,
    pub net: Vec<f64>,
    /// Mean of `NPDC_{j->i}` as `npdc[i][j]`.
    pub npdc: Vec<Vec<f64>>,
    /// Mean directional share `100 theta_ij` as `shares[i][j]`.
    pub shares: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverReport {
    pub assets: Vec<String>,
    pub horizon: usize,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub quantiles: Vec<AveragedSpillover>,
}

impl SpilloverSeries {
    pub fn quantile_index(&self, tau: f64) -> Result<usize> {
        self.quantiles
            .iter()
            .position(|q| (q - tau).abs() < 1e-12)
            .ok_or(Error::MissingQuantile(tau))
    }

    pub fn averaged(&self, q: usize) -> AveragedSpillover {
        let n = self.assets.len();
        let t = self.dates.len().max(1) as f64;
        let sums = &self.summaries[q];
        let vec_mean = |f: &dyn Fn(&ConnectednessSummary) -> &Vec<f64>| -> Vec<f64> {
            (0..n).map(|i| sums.iter().map(|s| f(s)[i]).sum::<f64>() / t).collect()
        };
        AveragedSpillover {
            tau: self.quantiles[q],
            tsi: sums.iter().map(|s| s.tsi).sum::<f64>() / t,
            from_others: vec_mean(&|s| &s.from_others),
            to_others: vec_mean(&|s| &s.to_others),
            net: vec_mean(&|s| &s.net),
            npdc: (0..n)
                .map(|i| (0..n).map(|j| sums.iter().map(|s| s.npdc[i][j]).sum::<f64>() / t).collect())
                .collect(),
            shares: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| self.matrices[q].iter().map(|m| 100.0 * m.entries[i][j]).sum::<f64>() / t)
                        .collect()
                })
                .collect(),
        }
    }

    pub fn report(&self) -> SpilloverReport {
        SpilloverReport {
            assets: self.assets.clone(),
            horizon: self.horizon,
            start: self.dates.first().copied(),
            end: self.dates.last().copied(),
            quantiles: (0..self.quantiles.len()).map(|q| self.averaged(q)).collect(),
        }
    }

    /// Time-averaged `NPDC_{j->target}` for every `j != target`, as `(symbol, value)`.
    pub fn mean_npdc_into(&self, target: usize, tau: f64) -> Result<Vec<(String, f64)>> {
        let q = self.quantile_index(tau)?;
        let avg = self.averaged(q);
        Ok((0..self.assets.len())
            .filter(|j| *j != target)
            .map(|j| (self.assets[j].clone(), avg.npdc[target][j]))
            .collect())
    }
}
