use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::normal_cdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OosR2Result {
    pub r2_oos: f64,
    pub mspe_adjust: f64,
    /// `None` when the adjustment series has zero long-run variance.
    pub cw_stat: Option<f64>,
    /// One-sided p-value for improvement over the benchmark.
    pub p_value: Option<f64>,
    pub n: usize,
}

/// Bartlett-kernel long-run variance with `lag` autocovariances.
fn hac_variance(f: &[f64], lag: usize) -> f64 {
    let n = f.len();
    let m = f.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = f.iter().map(|v| v - m).collect();
    let gamma = |l: usize| (l..n).map(|t| c[t] * c[t - l]).sum::<f64>() / n as f64;
    let mut v = gamma(0);
    for l in 1..=lag.min(n - 1) {
        v += 2.0 * (1.0 - l as f64 / (lag as f64 + 1.0)) * gamma(l);
    }
    v
}

/// Out-of-sample R^2 of `model` against `bench` with the Clark-West adjusted test.
pub fn r2_oos(y: &[f64], model: &[f64], bench: &[f64], hac_lag: usize) -> Result<OosR2Result> {
    let n = y.len();
    if model.len() != n || bench.len() != n {
        return Err(Error::Shape("realized, model and benchmark series must align".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "out-of-sample R^2".into(),
            needed: 2,
            got: n,
        });
    }
    let sse_b: f64 = y.iter().zip(bench).map(|(a, b)| (a - b) * (a - b)).sum();
    let sse_m: f64 = y.iter().zip(model).map(|(a, b)| (a - b) * (a - b)).sum();
    if !(sse_b > 0.0) {
        return Err(Error::invalid("benchmark has zero squared error; R^2_oos undefined"));
    }
    let f: Vec<f64> = (0..n)
        .map(|t| (y[t] - bench[t]).powi(2) - (y[t] - model[t]).powi(2) + (bench[t] - model[t]).powi(2))
        .collect();
    let mean = f.iter().sum::<f64>() / n as f64;
    let var = hac_variance(&f, hac_lag);
    let (cw_stat, p_value) = if var > 0.0 && var.is_finite() {
        let t = mean / (var / n as f64).sqrt();
        (Some(t), Some(1.0 - normal_cdf(t)))
    } else {
        log::warn!("Clark-West statistic undefined: adjustment series has no variance");
        (None, None)
    };
    Ok(OosR2Result {
        r2_oos: 1.0 - sse_m / sse_b,
        mspe_adjust: mean,
        cw_stat,
        p_value,
        n,
    })
}
