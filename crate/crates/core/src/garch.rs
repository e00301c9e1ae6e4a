//! GARCH(1,1) and GJR-GARCH benchmarks fitted by Gaussian quasi-maximum likelihood.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sample_variance;

pub const MIN_GARCH_OBS: usize = 250;
const PERSISTENCE_CAP: f64 = 1.0 - 1e-6;
const OMEGA_SCALE_BOUNDS: (f64, f64) = (1e-8, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GarchKind {
    Garch11,
    Gjr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub kind: GarchKind,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Extra ARCH loading on negative returns; zero for GARCH(1,1).
    pub gamma: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    /// Conditional variance for the day after the sample.
    pub next_variance: f64,
    /// Log-likelihood after every accepted optimizer step.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl GarchFit {
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta + 0.5 * self.gamma
    }

    pub fn unconditional_variance(&self) -> Option<f64> {
        let p = self.persistence();
        (p < 1.0).then(|| self.omega / (1.0 - p))
    }
}

/// Conditional variances `h_1..h_{n+1}` starting from `h_1 = h0`.
pub fn conditional_variances(r: &[f64], omega: f64, alpha: f64, beta: f64, gamma: f64, h0: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(r.len() + 1);
    h.push(h0);
    for t in 0..r.len() {
        let r2 = r[t] * r[t];
        let neg = if r[t] < 0.0 { r2 } else { 0.0 };
        let prev = h[t];
        h.push(omega + alpha * r2 + gamma * neg + beta * prev);
    }
    h
}

struct Objective<'a> {
    r: &'a [f64],
    var: f64,
    gjr: bool,
}

impl Objective<'_> {
    fn dim(&self) -> usize {
        if self.gjr {
            4
        } else {
            3
        }
    }

    fn unpack(&self, x: &[f64]) -> (f64, f64, f64, f64) {
        (x[0] * self.var, x[1], x[2], if self.gjr { x[3] } else { 0.0 })
    }

    /// Mean negative log-likelihood and its gradient in the scaled parameters.
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (omega, alpha, beta, gamma) = self.unpack(x);
        let k = self.dim();
        let n = self.r.len();
        let mut h = self.var;
        let mut dh = vec![0.0; k];
        let mut f = 0.0;
        let mut g = vec![0.0; k];
        for t in 0..n {
            if t > 0 {
                let rp = self.r[t - 1];
                let r2 = rp * rp;
                let neg = if rp < 0.0 { r2 } else { 0.0 };
                let h_prev = h;
                h = omega + alpha * r2 + gamma * neg + beta * h_prev;
                let mut nd = vec![0.0; k];
                nd[0] = self.var + beta * dh[0];
                nd[1] = r2 + beta * dh[1];
                nd[2] = h_prev + beta * dh[2];
                if self.gjr {
                    nd[3] = neg + beta * dh[3];
                }
                dh = nd;
            }
            if !(h > 0.0) || !h.is_finite() {
                return (f64::INFINITY, vec![0.0; k]);
            }
            let r2 = self.r[t] * self.r[t];
            f += 0.5 * (h.ln() + r2 / h);
            let w = 0.5 * (1.0 / h - r2 / (h * h));
            for i in 0..k {
                g[i] += w * dh[i];
            }
        }
        let nf = n as f64;
        (f / nf, g.into_iter().map(|v| v / nf).collect())
    }

    fn log_likelihood(&self, mean_nll: f64) -> f64 {
        let n = self.r.len() as f64;
        -(mean_nll * n) - 0.5 * n * (2.0 * PI).ln()
    }

    fn project(&self, x: &mut [f64]) {
        x[0] = x[0].clamp(OMEGA_SCALE_BOUNDS.0, OMEGA_SCALE_BOUNDS.1);
        let weights: &[f64] = if self.gjr { &[1.0, 1.0, 0.5] } else { &[1.0, 1.0] };
        let tail = &mut x[1..];
        for v in tail.iter_mut() {
            *v = v.max(0.0);
        }
        let total: f64 = tail.iter().zip(weights).map(|(v, w)| v * w).sum();
        if total > PERSISTENCE_CAP {
            // Euclidean projection onto {w'x = cap, x >= 0} by bisection on the multiplier.
            let mut lo = 0.0;
            let mut hi = tail.iter().zip(weights).map(|(v, w)| v / w).fold(0.0, f64::max);
            let orig: Vec<f64> = tail.to_vec();
            for _ in 0..200 {
                let mu = 0.5 * (lo + hi);
                let s: f64 = orig.iter().zip(weights).map(|(v, w)| w * (v - mu * w).max(0.0)).sum();
                if s > PERSISTENCE_CAP {
                    lo = mu;
                } else {
                    hi = mu;
                }
            }
            for (v, (o, w)) in tail.iter_mut().zip(orig.iter().zip(weights)) {
                *v = (o - hi * w).max(0.0);
            }
        }
    }
}

fn bfgs_update(hinv: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let k = s.len();
    let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
    if sy <= 1e-14 {
        return;
    }
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..k).map(|i| (0..k).map(|j| hinv[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..k {
        for j in 0..k {
            hinv[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

fn identity(k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Gaussian QMLE of a zero-mean GARCH(1,1) or GJR-GARCH on daily returns.
pub fn fit_garch(returns: &[f64], kind: GarchKind) -> Result<GarchFit> {
    if returns.len() < MIN_GARCH_OBS {
        return Err(Error::InsufficientData {
            what: "GARCH estimation".into(),
            needed: MIN_GARCH_OBS,
            got: returns.len(),
        });
    }
    if let Some(index) = returns.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index,
            asset: None,
            day: None,
        });
    }
    let var = returns.iter().map(|r| r * r).sum::<f64>() / returns.len() as f64;
    let var = if var > 0.0 { var } else { sample_variance(returns) };
    if !(var > 0.0) {
        return Err(Error::invalid("GARCH needs returns with positive variance"));
    }
    let gjr = kind == GarchKind::Gjr;
    let obj = Objective { r: returns, var, gjr };
    let mut x = if gjr {
        vec![0.0, 0.03, 0.90, 0.05]
    } else {
        vec![0.0, 0.05, 0.90]
    };
    x[0] = 1.0 - (x[1] + x[2] + if gjr { 0.5 * x[3] } else { 0.0 });
    obj.project(&mut x);
    let k = obj.dim();
    let (mut f, mut g) = obj.eval(&x);
    let mut hinv = identity(k);
    let mut trace = vec![obj.log_likelihood(f)];
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..1000 {
        iterations = it + 1;
        let mut pg = x.clone();
        for i in 0..k {
            pg[i] -= g[i];
        }
        obj.project(&mut pg);
        if pg.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < 1e-9 {
            converged = true;
            break;
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let d: Vec<f64> = (0..k).map(|i| -(0..k).map(|j| hinv[i][j] * g[j]).sum::<f64>()).collect();
            let mut t = 1.0;
            for _ in 0..60 {
                let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                obj.project(&mut xn);
                let dec: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
                let (fnew, gnew) = obj.eval(&xn);
                if fnew.is_finite() && fnew <= f + 1e-4 * dec && dec < 0.0 {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() || attempt == 1 {
                break;
            }
            hinv = identity(k);
        }
        let Some((xn, fnew, gnew)) = accepted else {
            converged = true;
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        bfgs_update(&mut hinv, &s, &y);
        let small = (f - fnew).abs() <= 1e-15 * f.abs().max(1.0);
        x = xn;
        f = fnew;
        g = gnew;
        trace.push(obj.log_likelihood(f));
        if small && s.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-10 {
            converged = true;
            break;
        }
    }
    let (omega, alpha, beta, gamma) = obj.unpack(&x);
    if alpha + beta + 0.5 * gamma >= PERSISTENCE_CAP - 1e-9 {
        log::warn!("GARCH optimum on the stationarity boundary");
    }
    if !converged {
        log::warn!("GARCH optimizer stopped after {iterations} iterations");
    }
    let h = conditional_variances(returns, omega, alpha, beta, gamma, var);
    Ok(GarchFit {
        kind,
        omega,
        alpha,
        beta,
        gamma,
        log_likelihood: obj.log_likelihood(f),
        converged,
        iterations,
        n_obs: returns.len(),
        next_variance: *h.last().unwrap(),
        trace,
    })
}

/// Variance forecasts for the next `h` days.
pub fn garch_forecast(fit: &GarchFit, h: usize) -> Vec<f64> {
    let p = fit.persistence();
    let mut out = Vec::with_capacity(h);
    let mut v = fit.next_variance;
    for k in 0..h {
        if k > 0 {
            v = fit.omega + p * v;
        }
        out.push(v);
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn simulate_garch(n: usize, omega: f64, alpha: f64, beta: f64, gamma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = omega / (1.0 - alpha - beta - 0.5 * gamma);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n + 500 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let r = h.sqrt() * z;
            out.push(r);
            h = omega + alpha * r * r + if r < 0.0 { gamma * r * r } else { 0.0 } + beta * h;
        }
        out.split_off(500)
    }

    #[test]
    fn recursion_matches_loop() {
        let r = simulate_garch(300, 0.05, 0.08, 0.9, 0.0, 1);
        let h = conditional_variances(&r, 0.1, 0.1, 0.8, 0.05, 2.0);
        let mut v = 2.0;
        for t in 0..r.len() {
            assert_eq!(h[t], v);
            let neg = if r[t] < 0.0 { r[t] * r[t] } else { 0.0 };
            v = 0.1 + 0.1 * (r[t] * r[t]) + 0.05 * neg + 0.8 * v;
        }
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let r = simulate_garch(400, 0.05, 0.08, 0.9, 0.04, 2);
        let var = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
        let obj = Objective { r: &r, var, gjr: true };
        let x = [0.07, 0.06, 0.85, 0.05];
        let (_, g) = obj.eval(&x);
        for i in 0..4 {
            let mut up = x;
            let mut dn = x;
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let num = (obj.eval(&up).0 - obj.eval(&dn).0) / 2e-6;
            assert!((num - g[i]).abs() < 1e-6 * (1.0 + num.abs()), "{i}: {num} vs {}", g[i]);
        }
    }

    #[test]
    fn recovers_parameters() {
        let r = simulate_garch(5000, 0.05, 0.08, 0.90, 0.0, 3);
        let f = fit_garch(&r, GarchKind::Garch11).unwrap();
        assert!(f.converged);
        assert!((f.alpha - 0.08).abs() < 0.03, "{f:?}");
        assert!((f.beta - 0.90).abs() < 0.04, "{f:?}");
        assert!(f.persistence() < 1.0);
    }

    #[test]
    fn gjr_detects_leverage() {
        let r = simulate_garch(5000, 0.05, 0.03, 0.88, 0.12, 4);
        let f = fit_garch(&r, GarchKind::Gjr).unwrap();
        assert!(f.gamma > 0.05, "{f:?}");
        assert!(f.persistence() < 1.0);
    }

    #[test]
    fn likelihood_trace_is_non_decreasing() {
        let r = simulate_garch(1000, 0.05, 0.1, 0.85, 0.0, 5);
        let f = fit_garch(&r, GarchKind::Gjr).unwrap();
        for w in f.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn forecasts() {
        let mut f = fit_garch(&simulate_garch(500, 0.05, 0.08, 0.9, 0.0, 6), GarchKind::Garch11).unwrap();
        f.alpha = 0.0;
        f.beta = 0.0;
        f.next_variance = f.omega;
        assert!(garch_forecast(&f, 10).iter().all(|v| *v == f.omega));
        let mut g = f.clone();
        g.alpha = 0.1;
        g.beta = 0.85;
        g.next_variance = 3.0;
        let path = garch_forecast(&g, 2000);
        let unc = g.unconditional_variance().unwrap();
        assert!((path[1999] - unc).abs() < 1e-9);
        let mut v = 3.0;
        for p in &path[..20] {
            assert_eq!(*p, v);
            v = g.omega + 0.95 * v;
        }
    }

    #[test]
    fn rejects_short_samples() {
        assert!(fit_garch(&[0.01; 100], GarchKind::Garch11).is_err());
    }
}
