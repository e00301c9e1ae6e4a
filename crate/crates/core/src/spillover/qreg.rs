//! Linear quantile regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Quantile (check) loss `u * (tau - 1{u < 0})`.
pub fn check_loss(u: f64, tau: f64) -> Result<f64> {
    validate_tau(tau)?;
    Ok(rho(u, tau))
}

pub(crate) fn validate_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("quantile level {tau} outside (0, 1)")))
    }
}

#[inline]
pub(crate) fn rho(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

#[inline]
pub(crate) fn asymmetry(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        1.0 - tau
    } else {
        tau
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub coef: Vec<f64>,
    /// Achieved (observation-weighted) check loss.
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    pub max_iter: usize,
    /// Relative coefficient-change tolerance at each smoothing level.
    pub tol: f64,
    /// Smallest smoothing level of `|u|` in the weights.
    pub min_smoothing: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
            min_smoothing: 1e-8,
        }
    }
}

fn total_loss(x: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>, b: &DVector<f64>, tau: f64) -> (f64, Vec<f64>) {
    let fitted = x * b;
    let resid: Vec<f64> = y.iter().zip(fitted.iter()).map(|(yi, fi)| yi - fi).collect();
    let loss = resid
        .iter()
        .enumerate()
        .map(|(i, r)| w.map_or(1.0, |w| w[i]) * rho(*r, tau))
        .sum();
    (loss, resid)
}

/// Solve `X' W X b = X' W y`; falls back to a tiny ridge if the Gram matrix is not positive definite.
pub(crate) fn weighted_least_squares(x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Option<DVector<f64>> {
    let k = x.ncols();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for (i, row) in x.row_iter().enumerate() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for a in 0..k {
            let xa = row[a] * wi;
            rhs[a] += xa * y[i];
            for b in 0..=a {
                gram[(a, b)] += xa * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    if let Some(ch) = gram.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    let scale = (0..k).map(|i| gram[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    for i in 0..k {
        gram[(i, i)] += 1e-12 * scale;
    }
    gram.cholesky().map(|ch| ch.solve(&rhs))
}

/// Exact interpolation through the `k` observations with the smallest absolute residuals.
fn vertex_polish(x: &DMatrix<f64>, y: &[f64], resid: &[f64]) -> Option<DVector<f64>> {
    let k = x.ncols();
    let mut idx: Vec<usize> = (0..resid.len()).collect();
    idx.sort_by(|a, b| resid[*a].abs().total_cmp(&resid[*b].abs()));
    let basis = &idx[..k];
    let xb = DMatrix::from_fn(k, k, |r, c| x[(basis[r], c)]);
    let yb = DVector::from_iterator(k, basis.iter().map(|i| y[*i]));
    xb.lu().solve(&yb)
}

/// Minimize `sum rho_tau(y - X b)`.
pub fn fit_quantile_regression(x: &DMatrix<f64>, y: &[f64], tau: f64) -> Result<QuantileFit> {
    fit_weighted_quantile_regression(x, y, None, tau, None, IrlsOptions::default())
}

/// Minimize `sum_i w_i rho_tau(y_i - x_i' b)` by IRLS on a smoothed check loss, starting from
/// (weighted) least squares or `init`, followed by an exact basic-solution polish.
///
/// The returned iterate is the best one seen, so its loss never exceeds the least-squares loss.
pub fn fit_weighted_quantile_regression(
    x: &DMatrix<f64>,
    y: &[f64],
    obs_weights: Option<&[f64]>,
    tau: f64,
    init: Option<&[f64]>,
    opts: IrlsOptions,
) -> Result<QuantileFit> {
    validate_tau(tau)?;
    let (n, k) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::Shape(format!("design has {n} rows, response has {}", y.len())));
    }
    if let Some(w) = obs_weights {
        if w.len() != n || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("observation weights must be finite, non-negative, one per row"));
        }
    }
    if n <= k {
        return Err(Error::InsufficientData {
            what: "quantile regression (rows must exceed columns)".into(),
            needed: k + 1,
            got: n,
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("quantile regression inputs must be finite"));
    }
    let ones = vec![1.0; n];
    let ow = obs_weights.unwrap_or(&ones);

    let ls = weighted_least_squares(x, y, ow)
        .ok_or_else(|| Error::invalid("quantile regression design is singular"))?;
    let (ls_loss, ls_resid) = total_loss(x, y, obs_weights, &ls, tau);
    let (mut b, mut resid, mut loss) = (ls.clone(), ls_resid, ls_loss);
    if let Some(init) = init {
        if init.len() != k {
            return Err(Error::Shape(format!("initial coefficients have length {}, expected {k}", init.len())));
        }
        let b0 = DVector::from_column_slice(init);
        let (l0, r0) = total_loss(x, y, obs_weights, &b0, tau);
        if l0 < loss {
            (b, resid, loss) = (b0, r0, l0);
        }
    }
    let mut best = (b.clone(), loss, resid.clone());

    let wsum: f64 = ow.iter().sum();
    let scale = resid.iter().zip(ow).map(|(r, w)| r.abs() * w).sum::<f64>() / wsum.max(f64::MIN_POSITIVE);
    let mut eps = (0.1 * scale).max(opts.min_smoothing);
    let mut converged = scale == 0.0;
    let mut iterations = 0;
    let mut w = vec![0.0; n];
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        for i in 0..n {
            w[i] = ow[i] * asymmetry(resid[i], tau) / resid[i].abs().max(eps);
        }
        let Some(nb) = weighted_least_squares(x, y, &w) else {
            break;
        };
        let change = (&nb - &b).amax() / (1.0 + nb.amax());
        b = nb;
        let (l, r) = total_loss(x, y, obs_weights, &b, tau);
        resid = r;
        if l < best.1 {
            best = (b.clone(), l, resid.clone());
        }
        if change < opts.tol {
            if eps <= opts.min_smoothing {
                converged = true;
            } else {
                eps = (eps * 0.1).max(opts.min_smoothing);
            }
        }
    }

    // The optimum is attained at a basic solution; snap to the nearest one.
    for _ in 0..3 {
        let Some(pb) = vertex_polish(x, y, &best.2) else { break };
        let (pl, pr) = total_loss(x, y, obs_weights, &pb, tau);
        if pl < best.1 {
            best = (pb, pl, pr);
        } else {
            break;
        }
    }
    if !converged {
        log::debug!("quantile regression stopped after {iterations} iterations without converging");
    }
    Ok(QuantileFit {
        coef: best.0.iter().copied().collect(),
        loss: best.1,
        iterations,
        converged,
    })
}
