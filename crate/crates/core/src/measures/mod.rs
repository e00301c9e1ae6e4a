//! Daily realized measures built from intraday log-returns.
//!
//! Every estimator here works on one (asset, day) cell; [`build_measure_panel`]
//! maps them over a [`ReturnPanel`].

pub mod ingest;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, normal_quantile, quantile_sorted};

/// Aligned intraday log-returns, indexed `[asset][day][intraday step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    assets: Vec<String>,
    days: Vec<NaiveDate>,
    returns: Vec<Vec<Vec<f64>>>,
}

impl ReturnPanel {
    pub fn new(assets: Vec<String>, days: Vec<NaiveDate>, returns: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if assets.is_empty() {
            return Err(Error::invalid("return panel needs at least one asset"));
        }
        if returns.len() != assets.len() {
            return Err(Error::Shape(format!(
                "{} assets but {} return series",
                assets.len(),
                returns.len()
            )));
        }
        if days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("days must be strictly increasing"));
        }
        for (a, per_day) in assets.iter().zip(&returns) {
            if per_day.len() != days.len() {
                return Err(Error::Shape(format!(
                    "asset {a} has {} days, expected {}",
                    per_day.len(),
                    days.len()
                )));
            }
            for (d, r) in days.iter().zip(per_day) {
                if r.is_empty() {
                    return Err(Error::invalid(format!("asset {a}, day {d}: empty return vector")));
                }
                if let Some(index) = r.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite {
                        index,
                        asset: Some(a.clone()),
                        day: Some(*d),
                    });
                }
            }
        }
        Ok(Self { assets, days, returns })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn day_returns(&self, asset: usize, day: usize) -> &[f64] {
        &self.returns[asset][day]
    }

    pub fn asset_index(&self, name: &str) -> Option<usize> {
        self.assets.iter().position(|a| a == name)
    }

    /// Restrict (and reorder) to the given assets.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let mut returns = Vec::with_capacity(names.len());
        for n in names {
            let i = self.asset_index(n).ok_or_else(|| Error::MissingAsset(n.clone()))?;
            returns.push(self.returns[i].clone());
        }
        Ok(Self {
            assets: names.to_vec(),
            days: self.days.clone(),
            returns,
        })
    }

    /// Daily close-to-open log return per asset: the sum of the day's intraday returns.
    pub fn daily_returns(&self, asset: usize) -> Vec<f64> {
        self.returns[asset].iter().map(|r| r.iter().sum()).collect()
    }

    /// All intraday returns of every asset and day, in panel order.
    pub fn pooled_returns(&self) -> Vec<f64> {
        self.returns.iter().flatten().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "RV")]
    Rv,
    #[serde(rename = "CV")]
    Cv,
    #[serde(rename = "CJ")]
    Cj,
    #[serde(rename = "RS_plus")]
    RsPlus,
    #[serde(rename = "RS_minus")]
    RsMinus,
    #[serde(rename = "REX_plus")]
    RexPlus,
    #[serde(rename = "REX_minus")]
    RexMinus,
    #[serde(rename = "REX_mod")]
    RexMod,
    #[serde(rename = "RK")]
    Rk,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 9] = [
        MeasureKind::Rv,
        MeasureKind::Cv,
        MeasureKind::Cj,
        MeasureKind::RsPlus,
        MeasureKind::RsMinus,
        MeasureKind::RexPlus,
        MeasureKind::RexMinus,
        MeasureKind::RexMod,
        MeasureKind::Rk,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MeasureKind::Rv => "RV",
            MeasureKind::Cv => "CV",
            MeasureKind::Cj => "CJ",
            MeasureKind::RsPlus => "RS_plus",
            MeasureKind::RsMinus => "RS_minus",
            MeasureKind::RexPlus => "REX_plus",
            MeasureKind::RexMinus => "REX_minus",
            MeasureKind::RexMod => "REX_mod",
            MeasureKind::Rk => "RK",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown measure kind `{s}`")))
    }
}

/// One realized measure per (asset, day), indexed `[asset][day]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurePanel {
    pub kind: MeasureKind,
    pub assets: Vec<String>,
    pub days: Vec<NaiveDate>,
    pub values: Vec<Vec<f64>>,
}

impl MeasurePanel {
    pub fn new(kind: MeasureKind, assets: Vec<String>, days: Vec<NaiveDate>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != assets.len() || values.iter().any(|v| v.len() != days.len()) {
            return Err(Error::Shape("measure panel values do not match (assets, days)".into()));
        }
        for (a, row) in assets.iter().zip(&values) {
            if let Some(index) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!(
                    "{kind} panel: asset {a}, day {} has invalid value {}",
                    days[index], row[index]
                )));
            }
        }
        Ok(Self { kind, assets, days, values })
    }

    pub fn asset_index(&self, name: &str) -> Option<usize> {
        self.assets.iter().position(|a| a == name)
    }

    pub fn series(&self, asset: usize) -> &[f64] {
        &self.values[asset]
    }

    pub fn series_by_name(&self, name: &str) -> Result<&[f64]> {
        let i = self.asset_index(name).ok_or_else(|| Error::MissingAsset(name.to_string()))?;
        Ok(&self.values[i])
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// Rows `start..end` of every asset.
    pub fn slice_days(&self, start: usize, end: usize) -> MeasurePanel {
        MeasurePanel {
            kind: self.kind,
            assets: self.assets.clone(),
            days: self.days[start..end].to_vec(),
            values: self.values.iter().map(|v| v[start..end].to_vec()).collect(),
        }
    }

    /// `ln(V + delta)` as a day-major matrix `[day][asset]`.
    pub fn log_rows(&self, delta: f64) -> Vec<Vec<f64>> {
        (0..self.days.len())
            .map(|d| self.values.iter().map(|v| (v[d] + delta).ln()).collect())
            .collect()
    }
}

fn check_finite(returns: &[f64]) -> Result<()> {
    match returns.iter().position(|r| !r.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            asset: None,
            day: None,
        }),
        None => Ok(()),
    }
}

fn sum_of_squares<'a, I: IntoIterator<Item = &'a f64>>(it: I) -> f64 {
    compensated_sum(it.into_iter().map(|r| r * r))
}

/// Sum of squared intraday returns.
pub fn realized_variance(returns: &[f64]) -> Result<f64> {
    check_finite(returns)?;
    Ok(sum_of_squares(returns))
}

/// Realized semivariances `(RS+, RS-)`; exact zeros contribute to neither side.
pub fn semivariances(returns: &[f64]) -> Result<(f64, f64)> {
    check_finite(returns)?;
    let plus = sum_of_squares(returns.iter().filter(|r| **r > 0.0));
    let minus = sum_of_squares(returns.iter().filter(|r| **r < 0.0));
    Ok((plus, minus))
}

/// Continuous / jump split of RV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSplit {
    pub cv: f64,
    pub cj: f64,
    pub bipower: f64,
    /// Ratio statistic; `None` when the day was too short to test.
    pub z: Option<f64>,
    /// Set when fewer than three returns were available.
    pub untested: bool,
}

/// `mu_p = E|Z|^p` for a standard normal.
fn abs_normal_moment(p: f64) -> f64 {
    use statrs::function::gamma::gamma;
    2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / gamma(0.5)
}

pub fn bipower_variation(returns: &[f64]) -> f64 {
    let n = returns.len();
    if n < 2 {
        return 0.0;
    }
    let s = compensated_sum(returns.windows(2).map(|w| w[0].abs() * w[1].abs()));
    (PI / 2.0) * (n as f64 / (n - 1) as f64) * s
}

pub fn tripower_quarticity(returns: &[f64]) -> f64 {
    let n = returns.len();
    if n < 3 {
        return 0.0;
    }
    let mu43 = abs_normal_moment(4.0 / 3.0);
    let s = compensated_sum(
        returns
            .windows(3)
            .map(|w| (w[0].abs() * w[1].abs() * w[2].abs()).powf(4.0 / 3.0)),
    );
    let nf = n as f64;
    nf * mu43.powi(-3) * (nf / (nf - 2.0)) * s
}

/// Jump-robust decomposition `RV = CV + CJ` gated by the ratio Z test at level `alpha`.
pub fn bipower_jump(returns: &[f64], alpha: f64) -> Result<JumpSplit> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::invalid(format!("jump test level {alpha} outside (0.5, 1)")));
    }
    let rv = realized_variance(returns)?;
    let n = returns.len();
    if n < 3 {
        return Ok(JumpSplit {
            cv: rv,
            cj: 0.0,
            bipower: bipower_variation(returns),
            z: None,
            untested: true,
        });
    }
    let bv = bipower_variation(returns);
    if rv == 0.0 || bv == 0.0 {
        return Ok(JumpSplit {
            cv: rv,
            cj: 0.0,
            bipower: bv,
            z: None,
            untested: false,
        });
    }
    let tq = tripower_quarticity(returns);
    let theta = (PI / 2.0).powi(2) + PI - 5.0;
    let ratio = (rv - bv) / rv;
    let z = ratio / (theta * (1.0 / n as f64) * (tq / (bv * bv)).max(1.0)).sqrt();
    let significant = z > normal_quantile(alpha) && bv < rv;
    let (cv, cj) = if significant { split_exact(rv, bv) } else { (rv, 0.0) };
    Ok(JumpSplit {
        cv,
        cj,
        bipower: bv,
        z: Some(z),
        untested: false,
    })
}

/// Returns `(cv, cj)` with `cv ≈ bv`, both non-negative and `cv + cj == rv` in floating point.
///
/// Whichever of the two parts is at least `rv / 2` is subtracted from `rv`, which is exact
/// by Sterbenz' lemma, so adding the parts back reproduces `rv` bit for bit.
fn split_exact(rv: f64, bv: f64) -> (f64, f64) {
    debug_assert!(bv < rv && bv >= 0.0);
    if bv >= rv / 2.0 {
        (bv, rv - bv)
    } else {
        let cj = rv - bv;
        (rv - cj, cj)
    }
}

/// Threshold split `(REX-, REXm, REX+)` of RV; `r <= lo` is extreme-negative, `r >= hi` extreme-positive.
pub fn rex_split(returns: &[f64], lo: f64, hi: f64) -> Result<(f64, f64, f64)> {
    if !(lo < hi) {
        return Err(Error::invalid(format!("REX thresholds must satisfy lo < hi, got {lo} >= {hi}")));
    }
    check_finite(returns)?;
    let minus = sum_of_squares(returns.iter().filter(|r| **r <= lo));
    let plus = sum_of_squares(returns.iter().filter(|r| **r >= hi));
    let moderate = sum_of_squares(returns.iter().filter(|r| **r > lo && **r < hi));
    Ok((minus, moderate, plus))
}

/// Parzen kernel weight.
pub fn parzen(x: f64) -> f64 {
    let x = x.abs();
    if x <= 0.5 {
        1.0 - 6.0 * x * x + 6.0 * x * x * x
    } else if x <= 1.0 {
        2.0 * (1.0 - x).powi(3)
    } else {
        0.0
    }
}

/// Realized autocovariance `sum_j r_j r_{j-h}`.
pub fn realized_autocovariance(returns: &[f64], lag: usize) -> f64 {
    if lag == 0 {
        return sum_of_squares(returns);
    }
    if lag >= returns.len() {
        return 0.0;
    }
    compensated_sum(returns[lag..].iter().zip(returns).map(|(a, b)| a * b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEstimate {
    pub value: f64,
    pub bandwidth: usize,
    /// Set when a negative raw estimate was clamped to zero.
    pub clamped: bool,
}

/// Parzen realized kernel with bandwidth `H`; bandwidth 0 reduces to RV.
pub fn realized_kernel(returns: &[f64], bandwidth: usize) -> Result<KernelEstimate> {
    check_finite(returns)?;
    if bandwidth >= returns.len() {
        return Err(Error::invalid(format!(
            "kernel bandwidth {bandwidth} must be smaller than the number of returns {}",
            returns.len()
        )));
    }
    let gamma0 = sum_of_squares(returns);
    if bandwidth == 0 {
        return Ok(KernelEstimate {
            value: gamma0,
            bandwidth,
            clamped: false,
        });
    }
    let hf = bandwidth as f64;
    let tail = compensated_sum((1..=bandwidth).map(|h| {
        parzen((h - 1) as f64 / hf) * 2.0 * realized_autocovariance(returns, h)
    }));
    let raw = gamma0 + tail;
    Ok(KernelEstimate {
        value: raw.max(0.0),
        bandwidth,
        clamped: raw < 0.0,
    })
}

/// `ceil(n^{3/5})`, capped below `n`.
pub fn default_bandwidth(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    ((n as f64).powf(0.6).ceil() as usize).min(n - 1)
}

/// Parzen bandwidth scaled by the noise-to-signal ratio, with noise variance
/// estimated from the first-order realized autocovariance.
pub fn auto_bandwidth(returns: &[f64]) -> usize {
    let n = returns.len();
    if n < 3 {
        return 0;
    }
    let rv = sum_of_squares(returns);
    let noise_var = -realized_autocovariance(returns, 1) / (n - 1) as f64;
    if noise_var <= 0.0 || rv <= 0.0 {
        return default_bandwidth(n);
    }
    let mut iv = rv - 2.0 * n as f64 * noise_var;
    if iv <= 0.0 {
        iv = rv;
    }
    const C_STAR: f64 = 3.5134;
    let xi2 = noise_var / iv;
    let h = C_STAR * xi2.powf(0.4) * (n as f64).powf(0.6);
    (h.ceil() as usize).clamp(1, n - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `ceil(n^{3/5})` per day.
    Default,
    /// Noise-adaptive bandwidth per day.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RexThresholds {
    /// Empirical quantiles of all pooled intraday returns, fixed across days.
    Pooled { q_lo: f64, q_hi: f64 },
    Fixed { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureParams {
    pub jump_alpha: f64,
    pub rex: RexThresholds,
    pub rk_bandwidth: Bandwidth,
}

impl Default for MeasureParams {
    fn default() -> Self {
        Self {
            jump_alpha: 0.99,
            rex: RexThresholds::Pooled { q_lo: 0.05, q_hi: 0.95 },
            rk_bandwidth: Bandwidth::Default,
        }
    }
}

impl RexThresholds {
    pub fn resolve(&self, panel: &ReturnPanel) -> Result<(f64, f64)> {
        match *self {
            RexThresholds::Fixed { lo, hi } => Ok((lo, hi)),
            RexThresholds::Pooled { q_lo, q_hi } => {
                if !(0.0 < q_lo && q_lo < q_hi && q_hi < 1.0) {
                    return Err(Error::invalid(format!("REX quantiles must satisfy 0 < {q_lo} < {q_hi} < 1")));
                }
                let mut pooled = panel.pooled_returns();
                pooled.sort_by(f64::total_cmp);
                Ok((quantile_sorted(&pooled, q_lo), quantile_sorted(&pooled, q_hi)))
            }
        }
    }
}

/// Apply one per-day estimator across every (asset, day) cell.
pub fn build_measure_panel(panel: &ReturnPanel, kind: MeasureKind, params: &MeasureParams) -> Result<MeasurePanel> {
    let rex = match kind {
        MeasureKind::RexPlus | MeasureKind::RexMinus | MeasureKind::RexMod => Some(params.rex.resolve(panel)?),
        _ => None,
    };
    let n_days = panel.days().len();
    let values: Vec<Vec<f64>> = (0..panel.assets().len())
        .into_par_iter()
        .map(|a| {
            (0..n_days)
                .map(|d| {
                    let r = panel.day_returns(a, d);
                    measure_cell(r, kind, params, rex).map_err(|e| e.at_cell(&panel.assets()[a], panel.days()[d]))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    MeasurePanel::new(kind, panel.assets().to_vec(), panel.days().to_vec(), values)
}

fn measure_cell(r: &[f64], kind: MeasureKind, params: &MeasureParams, rex: Option<(f64, f64)>) -> Result<f64> {
    Ok(match kind {
        MeasureKind::Rv => realized_variance(r)?,
        MeasureKind::RsPlus => semivariances(r)?.0,
        MeasureKind::RsMinus => semivariances(r)?.1,
        MeasureKind::Cv => bipower_jump(r, params.jump_alpha)?.cv,
        MeasureKind::Cj => bipower_jump(r, params.jump_alpha)?.cj,
        MeasureKind::RexMinus | MeasureKind::RexMod | MeasureKind::RexPlus => {
            let (lo, hi) = rex.expect("thresholds resolved for REX kinds");
            let (m, md, p) = rex_split(r, lo, hi)?;
            match kind {
                MeasureKind::RexMinus => m,
                MeasureKind::RexMod => md,
                _ => p,
            }
        }
        MeasureKind::Rk => {
            let h = match params.rk_bandwidth {
                Bandwidth::Default => default_bandwidth(r.len()),
                Bandwidth::Auto => auto_bandwidth(r),
                Bandwidth::Fixed(h) => h,
            };
            let est = realized_kernel(r, h)?;
            if est.clamped {
                log::warn!("negative realized kernel clamped to zero");
            }
            est.value
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn random_returns(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-0.01..0.01)).collect()
    }

    /// Double-double accumulation of squares (TwoProduct + TwoSum), an oracle
    /// independent of the compensated summation used by the estimators.
    fn dd_sum_sq<'a>(xs: impl IntoIterator<Item = &'a f64>) -> f64 {
        let (mut hi, mut lo) = (0.0_f64, 0.0_f64);
        for &x in xs {
            let p = x * x;
            let pe = x.mul_add(x, -p);
            let s = hi + p;
            let bb = s - hi;
            let e = (hi - (s - bb)) + (p - bb);
            hi = s;
            lo += e + pe;
        }
        hi + lo
    }

    #[test]
    fn realized_variance_examples() {
        assert_eq!(realized_variance(&[]).unwrap(), 0.0);
        let rv = realized_variance(&[0.01, -0.02, 0.005]).unwrap();
        assert!(rel(rv, 5.25e-4) < 1e-15);
        let r = random_returns(7, 288);
        assert!(rel(realized_variance(&r).unwrap(), dd_sum_sq(&r)) < 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        let err = realized_variance(&[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
    }

    #[test]
    fn semivariance_examples() {
        let (p, m) = semivariances(&[0.01, -0.02, 0.005]).unwrap();
        assert!(rel(p, 1.25e-4) < 1e-15);
        assert!(rel(m, 4.0e-4) < 1e-15);
        let pos = [0.01, 0.02, 0.03];
        let (p, m) = semivariances(&pos).unwrap();
        assert_eq!(p, realized_variance(&pos).unwrap());
        assert_eq!(m, 0.0);
        let r = random_returns(11, 288);
        let (p, m) = semivariances(&r).unwrap();
        assert!(rel(p + m, dd_sum_sq(&r)) < 1e-15);
    }

    #[test]
    fn jump_split_short_day_untested() {
        let s = bipower_jump(&[0.01, 0.01], 0.99).unwrap();
        assert!(s.untested);
        assert!(rel(s.cv, 2e-4) < 1e-15);
        assert_eq!(s.cj, 0.0);
    }

    #[test]
    fn jump_split_identity_is_exact() {
        for seed in 0..200 {
            let mut r = random_returns(seed, 100);
            r[seed as usize % 100] += 0.2 * ((seed % 3) as f64 - 1.0);
            let rv = realized_variance(&r).unwrap();
            let s = bipower_jump(&r, 0.99).unwrap();
            assert_eq!(s.cv + s.cj, rv);
            assert!(s.cv >= 0.0 && s.cj >= 0.0);
        }
        assert_eq!(split_exact(1.0, 0.1).0 + split_exact(1.0, 0.1).1, 1.0);
        assert_eq!(split_exact(0.3, 0.2).0 + split_exact(0.3, 0.2).1, 0.3);
    }

    #[test]
    fn rex_examples() {
        let r = [-0.03, -0.01, 0.0, 0.01, 0.03];
        let (m, md, p) = rex_split(&r, -0.02, 0.02).unwrap();
        assert!(rel(m, 9e-4) < 1e-15);
        assert!(rel(md, 2e-4) < 1e-15);
        assert!(rel(p, 9e-4) < 1e-15);
        assert!(rel(m + md + p, 2.0e-3) < 1e-15);
        let (m, md, p) = rex_split(&r, -1.0, 1.0).unwrap();
        assert_eq!((m, p), (0.0, 0.0));
        assert_eq!(md, realized_variance(&r).unwrap());
        assert!(rex_split(&r, 0.02, 0.02).is_err());
        let r = random_returns(3, 288);
        let (m, md, p) = rex_split(&r, -0.004, 0.005).unwrap();
        assert!(rel(m + md + p, dd_sum_sq(&r)) < 1e-15);
    }

    #[test]
    fn parzen_endpoints() {
        assert_eq!(parzen(0.0), 1.0);
        assert_eq!(parzen(1.0), 0.0);
        assert!((parzen(0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kernel_bandwidth_zero_is_rv() {
        let r = random_returns(5, 288);
        assert_eq!(
            realized_kernel(&r, 0).unwrap().value.to_bits(),
            realized_variance(&r).unwrap().to_bits()
        );
        assert!(realized_kernel(&r, 288).is_err());
    }

    #[test]
    fn kernel_clamps_negative() {
        // Perfectly alternating returns have strongly negative autocovariance.
        let r: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let est = realized_kernel(&r, 3).unwrap();
        assert!(est.value >= 0.0);
    }

    #[test]
    fn default_bandwidth_values() {
        assert_eq!(default_bandwidth(288), 30);
        assert_eq!(default_bandwidth(1), 0);
    }

    #[test]
    fn measure_kind_round_trips_label() {
        for k in MeasureKind::ALL {
            assert_eq!(k.label().parse::<MeasureKind>().unwrap(), k);
        }
    }
}
