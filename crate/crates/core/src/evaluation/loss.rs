use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ForecastRun;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LossFunction {
    #[serde(rename = "MSE")]
    Mse,
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "RMSE")]
    Rmse,
    #[serde(rename = "QLIKE")]
    Qlike,
}

impl LossFunction {
    pub const ALL: [LossFunction; 4] = [LossFunction::Mse, LossFunction::Mae, LossFunction::Rmse, LossFunction::Qlike];

    pub fn label(self) -> &'static str {
        match self {
            LossFunction::Mse => "MSE",
            LossFunction::Mae => "MAE",
            LossFunction::Rmse => "RMSE",
            LossFunction::Qlike => "QLIKE",
        }
    }
}

impl fmt::Display for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for LossFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossFunction::ALL
            .into_iter()
            .find(|l| l.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown loss `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossScale {
    Log,
    Level,
}

/// `scale` applies to MSE/MAE/RMSE; QLIKE always compares level-scale pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossOptions {
    pub scale: LossScale,
    /// Map log forecasts to levels as `exp(f + s^2 / 2)` instead of `exp(f)`.
    pub half_variance_correction: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            scale: LossScale::Log,
            half_variance_correction: false,
        }
    }
}

pub fn qlike(y: f64, f: f64) -> Result<f64> {
    if !(f > 0.0 && f.is_finite()) || !(y > 0.0 && y.is_finite()) {
        return Err(Error::invalid(format!("QLIKE needs positive pairs, got y = {y}, f = {f}")));
    }
    let r = y / f;
    Ok(r - r.ln() - 1.0)
}

fn level_pair(run: &ForecastRun, t: usize, opts: &LossOptions) -> (f64, f64) {
    let corr = if opts.half_variance_correction {
        0.5 * run.residual_variances[t]
    } else {
        0.0
    };
    (run.targets[t].exp(), (run.predictions[t] + corr).exp())
}

/// Loss of every forecast date. RMSE contributes squared errors per date, so its
/// aggregate is the square root of the mean.
pub fn per_date_loss(run: &ForecastRun, loss: LossFunction, opts: &LossOptions) -> Vec<Result<f64>> {
    (0..run.len())
        .map(|t| {
            let (y, f) = match (loss, opts.scale) {
                (LossFunction::Qlike, _) | (_, LossScale::Level) => level_pair(run, t, opts),
                _ => (run.targets[t], run.predictions[t]),
            };
            match loss {
                LossFunction::Mse | LossFunction::Rmse => Ok((y - f) * (y - f)),
                LossFunction::Mae => Ok((y - f).abs()),
                LossFunction::Qlike => qlike(y, f),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    pub qlike: f64,
    pub n: usize,
    pub qlike_failures: usize,
}

impl LossSummary {
    pub fn get(&self, loss: LossFunction) -> f64 {
        match loss {
            LossFunction::Mse => self.mse,
            LossFunction::Mae => self.mae,
            LossFunction::Rmse => self.rmse,
            LossFunction::Qlike => self.qlike,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub summary: LossSummary,
    /// Per-date losses keyed by function; QLIKE failures are dropped with their dates.
    pub per_date: BTreeMap<LossFunction, Vec<(NaiveDate, f64)>>,
    pub failures: Vec<(NaiveDate, String)>,
}

pub fn loss_suite(run: &ForecastRun, opts: &LossOptions) -> LossReport {
    let mut per_date = BTreeMap::new();
    let mut failures = Vec::new();
    for loss in LossFunction::ALL {
        let mut v = Vec::with_capacity(run.len());
        for (t, r) in per_date_loss(run, loss, opts).into_iter().enumerate() {
            match r {
                Ok(x) => v.push((run.dates[t], x)),
                Err(e) => failures.push((run.dates[t], e.to_string())),
            }
        }
        per_date.insert(loss, v);
    }
    let mean = |l: LossFunction| {
        let v: &Vec<(NaiveDate, f64)> = &per_date[&l];
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().map(|(_, x)| x).sum::<f64>() / v.len() as f64
        }
    };
    let mse = mean(LossFunction::Mse);
    let summary = LossSummary {
        mse,
        mae: mean(LossFunction::Mae),
        rmse: mean(LossFunction::Rmse).sqrt(),
        qlike: mean(LossFunction::Qlike),
        n: run.len(),
        qlike_failures: failures.len(),
    };
    LossReport {
        summary,
        per_date,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::Scheme;
    use chrono::Duration;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn run(y: Vec<f64>, f: Vec<f64>) -> ForecastRun {
        let s = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
        ForecastRun {
            model: "m".into(),
            horizon: 1,
            scheme: Scheme::RollingFixed { window: 10 },
            dates: (0..y.len()).map(|i| s + Duration::days(i as i64)).collect(),
            residual_variances: vec![0.0; y.len()],
            predictions: f,
            targets: y,
            failures: vec![],
        }
    }

    #[test]
    fn perfect_forecast_has_zero_losses() {
        let y = vec![-2.0, -1.5, -3.0];
        let s = loss_suite(&run(y.clone(), y), &LossOptions::default()).summary;
        assert_eq!((s.mse, s.mae, s.rmse, s.qlike), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_error() {
        let y = vec![-2.0, -1.5, -3.0, 0.5];
        let f: Vec<f64> = y.iter().map(|v| v - 0.25).collect();
        let s = loss_suite(&run(y, f), &LossOptions::default()).summary;
        assert!((s.mse - 0.0625).abs() < 1e-15);
        assert!((s.mae - 0.25).abs() < 1e-15);
        assert!((s.rmse - 0.25).abs() < 1e-15);
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..200).map(|_| rng.random_range(-5.0..-1.0)).collect();
        let f: Vec<f64> = (0..200).map(|_| rng.random_range(-5.0..-1.0)).collect();
        let s = loss_suite(&run(y.clone(), f.clone()), &LossOptions::default()).summary;
        let (mut a, mut b, mut q) = (0.0, 0.0, 0.0);
        for i in 0..200 {
            a += (y[i] - f[i]).powi(2);
            b += (y[i] - f[i]).abs();
            let r = y[i].exp() / f[i].exp();
            q += r - r.ln() - 1.0;
        }
        assert!((s.mse - a / 200.0).abs() < 1e-12);
        assert!((s.mae - b / 200.0).abs() < 1e-12);
        assert!((s.qlike - q / 200.0).abs() < 1e-12);
        assert!((s.rmse * s.rmse - s.mse).abs() < 1e-12);
    }

    #[test]
    fn qlike_rejects_non_positive() {
        assert!(qlike(1.0, 0.0).is_err());
        assert!(qlike(1.0, -1.0).is_err());
        assert_eq!(qlike(2.0, 2.0).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn qlike_non_negative(y in 1e-6f64..10.0, f in 1e-6f64..10.0) {
            let q = qlike(y, f).unwrap();
            prop_assert!(q >= -1e-15);
            if (y - f).abs() > 1e-6 * y {
                prop_assert!(q > 0.0);
            }
        }
    }
}
