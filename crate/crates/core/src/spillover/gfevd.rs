//! Moving-average representation and generalized forecast-error variance decomposition.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MaCoefficients {
    /// `A_0..A_{H-1}`
    pub matrices: Vec<DMatrix<f64>>,
    /// Spectral radius of the companion matrix exceeds one.
    pub explosive: bool,
}

/// `A_0 = I`, `A_h = sum_{l=1}^{min(h,p)} Phi_l A_{h-l}`.
pub fn ma_coefficients(lags: &[DMatrix<f64>], horizon: usize) -> Result<MaCoefficients> {
    let p = lags.len();
    if p == 0 {
        return Err(Error::invalid("at least one lag matrix is required"));
    }
    let n = lags[0].nrows();
    if lags.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::Shape("lag matrices must all be N x N".into()));
    }
    let mut mats: Vec<DMatrix<f64>> = Vec::with_capacity(horizon);
    for h in 0..horizon {
        if h == 0 {
            mats.push(DMatrix::identity(n, n));
            continue;
        }
        let mut acc = DMatrix::zeros(n, n);
        for l in 1..=h.min(p) {
            acc += &lags[l - 1] * &mats[h - l];
        }
        mats.push(acc);
    }
    let explosive = spectral_radius(lags) > 1.0;
    if explosive {
        log::debug!("VAR companion matrix has spectral radius above one");
    }
    Ok(MaCoefficients { matrices: mats, explosive })
}

/// Spectral radius of the VAR companion matrix.
pub fn spectral_radius(lags: &[DMatrix<f64>]) -> f64 {
    let p = lags.len();
    let n = lags[0].nrows();
    let mut c = DMatrix::<f64>::zeros(n * p, n * p);
    for (l, m) in lags.iter().enumerate() {
        c.view_mut((0, l * n), (n, n)).copy_from(m);
    }
    for i in n..n * p {
        c[(i, i - n)] = 1.0;
    }
    if c.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    match c.clone().try_schur(f64::EPSILON, 10_000) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => gelfand_radius(c),
    }
}

/// `||C^k||^{1/k}` at `k = 2^40` by normalized repeated squaring.
fn gelfand_radius(mut c: DMatrix<f64>) -> f64 {
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..40 {
        let norm = c.norm();
        if norm == 0.0 {
            return 0.0;
        }
        c /= norm;
        log_scale += norm.ln() / k;
        c = &c * &c;
        k *= 2.0;
    }
    (log_scale + c.norm().ln() / k).exp()
}

/// Row-normalized GFEVD table at one (time, quantile, horizon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverMatrix {
    /// `entries[i][j]`: share of asset i's forecast-error variance due to shocks in j.
    pub entries: Vec<Vec<f64>>,
    pub date: Option<NaiveDate>,
    pub tau: f64,
    pub horizon: usize,
}

impl SpilloverMatrix {
    pub fn n(&self) -> usize {
        self.entries.len()
    }

    /// Validate row sums and non-negativity.
    pub fn from_entries(entries: Vec<Vec<f64>>, tau: f64, horizon: usize) -> Result<Self> {
        let n = entries.len();
        for row in &entries {
            if row.len() != n {
                return Err(Error::Shape("spillover matrix must be square".into()));
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("spillover entries must be finite and non-negative"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(format!("spillover row sums to {s}, expected 1")));
            }
        }
        Ok(Self {
            entries,
            date: None,
            tau,
            horizon,
        })
    }
}

/// Generalized FEVD, rows normalized to one.
///
/// `theta_ij = sigma_jj^{-1} sum_h (e_i' A_h Sigma e_j)^2 / sum_h (e_i' A_h Sigma A_h' e_i)`.
pub fn gfevd(ma: &[DMatrix<f64>], sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if sigma.ncols() != n || ma.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::Shape("GFEVD inputs must be N x N".into()));
    }
    if ma.is_empty() {
        return Err(Error::invalid("GFEVD needs at least one moving-average matrix"));
    }
    if let Some(i) = (0..n).find(|&i| !(sigma[(i, i)] > 0.0)) {
        return Err(Error::invalid(format!("residual covariance has non-positive diagonal at {i}")));
    }
    let mut num = DMatrix::<f64>::zeros(n, n);
    let mut den = vec![0.0; n];
    for a in ma {
        let a_sigma = a * sigma;
        for i in 0..n {
            for j in 0..n {
                num[(i, j)] += a_sigma[(i, j)] * a_sigma[(i, j)];
            }
            den[i] += a_sigma.row(i).dot(&a.row(i));
        }
    }
    let mut theta = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            theta[(i, j)] = num[(i, j)] / sigma[(j, j)] / den[i];
        }
        let s: f64 = theta.row(i).sum();
        for j in 0..n {
            theta[(i, j)] /= s;
        }
    }
    Ok(theta)
}

pub fn spillover_matrix(
    lags: &[DMatrix<f64>],
    sigma: &DMatrix<f64>,
    horizon: usize,
    tau: f64,
    date: Option<NaiveDate>,
) -> Result<SpilloverMatrix> {
    let ma = ma_coefficients(lags, horizon)?;
    let theta = gfevd(&ma.matrices, sigma)?;
    Ok(SpilloverMatrix {
        entries: (0..theta.nrows()).map(|i| theta.row(i).iter().copied().collect()).collect(),
        date,
        tau,
        horizon,
    })
}
