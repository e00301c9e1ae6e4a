use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Trailing window of fixed length.
    RollingFixed { window: usize },
    /// Window grows from the first day of the sample.
    Expanding { initial: usize },
}

impl Scheme {
    pub fn min_window(&self) -> usize {
        match *self {
            Scheme::RollingFixed { window } => window,
            Scheme::Expanding { initial } => initial,
        }
    }

    /// Estimation days for a forecast whose target starts at day `end`.
    pub fn window(&self, end: usize) -> (usize, usize) {
        match *self {
            Scheme::RollingFixed { window } => (end - window, end),
            Scheme::Expanding { .. } => (0, end),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    /// Forecast of the log-scale target.
    pub value: f64,
    /// In-sample residual variance on the log scale, when the model has one.
    pub residual_variance: Option<f64>,
}

impl From<f64> for Forecast {
    fn from(value: f64) -> Self {
        Forecast {
            value,
            residual_variance: None,
        }
    }
}

/// A model that can be re-estimated on any window of a fixed daily sample.
pub trait Forecaster: Sync {
    fn name(&self) -> String;

    /// Forecast of the mean log target over days `end..end + h`, using days `start..end` only.
    fn forecast(&self, start: usize, end: usize, h: usize) -> Result<Forecast>;

    fn forecast_many(&self, windows: &[(usize, usize)], h: usize) -> Vec<Result<Forecast>> {
        windows.par_iter().map(|(s, e)| self.forecast(*s, *e, h)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRun {
    pub model: String,
    pub horizon: usize,
    pub scheme: Scheme,
    pub dates: Vec<NaiveDate>,
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    /// Log-scale residual variance of each window's fit (0 when unavailable).
    pub residual_variances: Vec<f64>,
    /// Forecast dates whose window failed, with the reason.
    pub failures: Vec<(NaiveDate, String)>,
}

impl ForecastRun {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.targets.iter().zip(&self.predictions).map(|(y, f)| y - f).collect()
    }

    /// Keep only the given dates (which must be a subset of this run's dates).
    pub fn restrict(&self, dates: &[NaiveDate]) -> ForecastRun {
        let mut out = ForecastRun {
            dates: Vec::new(),
            predictions: Vec::new(),
            targets: Vec::new(),
            residual_variances: Vec::new(),
            failures: self.failures.clone(),
            ..self.clone()
        };
        for (i, d) in self.dates.iter().enumerate() {
            if dates.binary_search(d).is_ok() {
                out.dates.push(*d);
                out.predictions.push(self.predictions[i]);
                out.targets.push(self.targets[i]);
                out.residual_variances.push(self.residual_variances[i]);
            }
        }
        out
    }
}

/// Produce `span` consecutive forecasts ending with the last day whose `h`-day target is observed.
///
/// `log_target` is the daily log-scale series the target averages; `dates` labels its days.
pub fn rolling_forecast(
    model: &dyn Forecaster,
    dates: &[NaiveDate],
    log_target: &[f64],
    scheme: Scheme,
    span: usize,
    h: usize,
) -> Result<ForecastRun> {
    let n = log_target.len();
    if dates.len() != n {
        return Err(Error::Shape("dates and target series differ in length".into()));
    }
    if h == 0 || span == 0 {
        return Err(Error::invalid("horizon and forecast span must be positive"));
    }
    let needed = scheme.min_window() + span + h - 1;
    if n < needed || scheme.min_window() == 0 {
        return Err(Error::InsufficientData {
            what: format!("{} forecasts at horizon {h}", span),
            needed,
            got: n,
        });
    }
    let first = n + 1 - span - h;
    let windows: Vec<(usize, usize)> = (first..first + span).map(|e| scheme.window(e)).collect();
    let results = model.forecast_many(&windows, h);
    let mut run = ForecastRun {
        model: model.name(),
        horizon: h,
        scheme,
        dates: Vec::with_capacity(span),
        predictions: Vec::with_capacity(span),
        targets: Vec::with_capacity(span),
        residual_variances: Vec::with_capacity(span),
        failures: Vec::new(),
    };
    for (&(_, e), res) in windows.iter().zip(results) {
        let date = dates[e];
        match res {
            Ok(f) if f.value.is_finite() => {
                run.dates.push(date);
                run.predictions.push(f.value);
                run.targets.push(log_target[e..e + h].iter().sum::<f64>() / h as f64);
                run.residual_variances.push(f.residual_variance.unwrap_or(0.0));
            }
            Ok(f) => run.failures.push((date, format!("non-finite forecast {}", f.value))),
            Err(err) => run.failures.push((date, err.to_string())),
        }
    }
    if !run.failures.is_empty() {
        log::warn!("{}: {} of {span} forecast windows failed", run.model, run.failures.len());
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;

    struct Frozen<'a> {
        series: &'a [f64],
        coef: (f64, f64),
    }

    impl Forecaster for Frozen<'_> {
        fn name(&self) -> String {
            "frozen".into()
        }

        fn forecast(&self, _start: usize, end: usize, _h: usize) -> Result<Forecast> {
            if end == 90 {
                return Err(Error::invalid("boom"));
            }
            Ok((self.coef.0 + self.coef.1 * self.series[end - 1]).into())
        }
    }

    struct WindowMean<'a>(&'a [f64]);

    impl Forecaster for WindowMean<'_> {
        fn name(&self) -> String {
            "mean".into()
        }

        fn forecast(&self, start: usize, end: usize, _h: usize) -> Result<Forecast> {
            Ok((self.0[start..end].iter().sum::<f64>() / (end - start) as f64).into())
        }
    }

    fn dates(n: usize) -> Vec<NaiveDate> {
        let s = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
        (0..n).map(|i| s + Duration::days(i as i64)).collect()
    }

    #[test]
    fn shape_and_constant_series() {
        let y = vec![-3.0; 100];
        let run = rolling_forecast(&WindowMean(&y), &dates(100), &y, Scheme::RollingFixed { window: 50 }, 30, 5).unwrap();
        assert_eq!(run.len(), 30);
        assert!(run.predictions.iter().all(|p| *p == -3.0));
        assert!(run.dates.windows(2).all(|w| w[1] - w[0] == Duration::days(1)));
        assert_eq!(*run.dates.last().unwrap(), dates(100)[95]);
        assert!(rolling_forecast(&WindowMean(&y), &dates(100), &y, Scheme::RollingFixed { window: 67 }, 30, 5).is_err());
        assert!(rolling_forecast(&WindowMean(&y), &dates(100), &y, Scheme::RollingFixed { window: 66 }, 30, 5).is_ok());
    }

    #[test]
    fn frozen_model_matches_hand_loop_and_records_failures() {
        let y: Vec<f64> = (0..120).map(|i| ((i * 7) % 13) as f64 * 0.1).collect();
        let m = Frozen {
            series: &y,
            coef: (0.2, 0.5),
        };
        let d = dates(120);
        let run = rolling_forecast(&m, &d, &y, Scheme::Expanding { initial: 60 }, 40, 1).unwrap();
        assert_eq!(run.failures.len(), 1);
        assert_eq!(run.failures[0].0, d[90]);
        let mut k = 0;
        for e in 80..120 {
            if e == 90 {
                continue;
            }
            assert_eq!(run.dates[k], d[e]);
            assert_eq!(run.predictions[k], 0.2 + 0.5 * y[e - 1]);
            assert_eq!(run.targets[k], y[e]);
            k += 1;
        }
    }
}
