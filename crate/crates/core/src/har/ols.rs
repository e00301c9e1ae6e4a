use nalgebra::DMatrix;

use super::{fit_statistics, HarDesign, HarFit, HarTerm};
use crate::error::{Error, Result};

const COLLINEAR_TOL: f64 = 1e-9;

/// Names of regressors (intercept included) that are linear combinations of earlier ones.
fn collinear_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut bad = Vec::new();
    for (c, name) in names.iter().enumerate() {
        let mut v: Vec<f64> = x.column(c).iter().copied().collect();
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(b).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= COLLINEAR_TOL * norm0 {
            bad.push(name.clone());
        } else {
            basis.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    bad
}

/// Least squares with homoskedastic standard errors.
pub fn fit_ols(design: &HarDesign) -> Result<HarFit> {
    let n = design.n_rows();
    let p = design.x.ncols();
    let k = p + 1;
    if n <= k {
        return Err(Error::InsufficientData {
            what: "OLS fit".into(),
            needed: k + 1,
            got: n,
        });
    }
    let x = DMatrix::from_fn(n, k, |r, c| if c == 0 { 1.0 } else { design.x[(r, c - 1)] });
    let mut names = vec!["intercept".to_string()];
    names.extend(design.columns.iter().map(|c| c.to_string()));
    let bad = collinear_columns(&x, &names);
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    let y = nalgebra::DVector::from_column_slice(&design.response);
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient { columns: names.clone() })?;
    let fitted: Vec<f64> = (&x * &beta).iter().copied().collect();
    let (s2, r2, adj, aic, bic) = fit_statistics(&design.response, &fitted, k);
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient { columns: names.clone() })?;
    let cov = &rinv * rinv.transpose() * s2;
    let se: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    Ok(HarFit {
        model: String::new(),
        intercept: beta[0],
        intercept_std_error: Some(se[0]),
        terms: design
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| HarTerm {
                column: *c,
                estimate: beta[i + 1],
                std_error: Some(se[i + 1]),
            })
            .collect(),
        residual_variance: s2,
        r_squared: r2,
        adj_r_squared: adj,
        aic,
        bic,
        n_obs: n,
        lambda: None,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::har::{build_har_design, predict, HarColumn, HarFamily, HarSpec};
    use crate::measures::MeasureKind;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design(x: DMatrix<f64>, y: Vec<f64>) -> HarDesign {
        let n = y.len();
        let columns = (0..x.ncols())
            .map(|c| HarColumn {
                component: MeasureKind::ALL[c],
                horizon: Some(1),
            })
            .collect();
        HarDesign {
            columns,
            x,
            response: y,
            dates: vec![NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(); n],
            rows: (0..n).collect(),
        }
    }

    fn random_design(n: usize, p: usize, seed: u64) -> HarDesign {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = (0..n).map(|r| 0.5 + x.row(r).sum() * 0.3 + rng.random_range(-0.5..0.5)).collect();
        design(x, y)
    }

    #[test]
    fn exact_linear_response() {
        let mut d = random_design(50, 3, 1);
        d.response = (0..50).map(|r| 1.0 + 2.0 * d.x[(r, 0)] - d.x[(r, 1)] + 0.5 * d.x[(r, 2)]).collect();
        let f = fit_ols(&d).unwrap();
        assert!((f.intercept - 1.0).abs() < 1e-10);
        for (a, b) in f.slopes().iter().zip([2.0, -1.0, 0.5]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations() {
        let d = random_design(200, 4, 2);
        let f = fit_ols(&d).unwrap();
        let x = DMatrix::from_fn(200, 5, |r, c| if c == 0 { 1.0 } else { d.x[(r, c - 1)] });
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * nalgebra::DVector::from_column_slice(&d.response);
        let b = xtx.cholesky().unwrap().solve(&xty);
        assert!((f.intercept - b[0]).abs() < 1e-8);
        for i in 0..4 {
            assert!((f.slopes()[i] - b[i + 1]).abs() < 1e-8);
        }
    }

    #[test]
    fn intercept_only_is_mean() {
        let d = design(DMatrix::zeros(10, 0), (1..=10).map(f64::from).collect());
        let f = fit_ols(&d).unwrap();
        assert!((f.intercept - 5.5).abs() < 1e-12);
    }

    #[test]
    fn residuals_orthogonal_and_information_criteria() {
        let d = random_design(120, 3, 3);
        let f = fit_ols(&d).unwrap();
        let fitted = predict(&f, &d).unwrap();
        let resid: Vec<f64> = d.response.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        assert!(resid.iter().sum::<f64>().abs() < 1e-8);
        for c in 0..3 {
            let s: f64 = resid.iter().enumerate().map(|(r, e)| e * d.x[(r, c)]).sum();
            assert!(s.abs() < 1e-8);
        }
        let sse: f64 = resid.iter().map(|e| e * e).sum();
        let n = 120.0;
        assert!((f.aic - (n * (sse / n).ln() + 8.0)).abs() < 1e-9);
        assert!((f.bic - (n * (sse / n).ln() + 4.0 * n.ln())).abs() < 1e-9);
        assert!((f.adj_r_squared - (1.0 - (1.0 - f.r_squared) * 119.0 / 116.0)).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_named() {
        let mut d = random_design(40, 3, 4);
        for r in 0..40 {
            d.x[(r, 2)] = 2.0 * d.x[(r, 0)] - d.x[(r, 1)];
        }
        match fit_ols(&d) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![d.columns[2].to_string()]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn adding_spillover_column_never_lowers_r2() {
        let data = crate::har::design::tests::random_data(200, 7, true);
        let plain = fit_ols(&build_har_design(&data, &HarSpec::new(HarFamily::Rs, false)).unwrap()).unwrap();
        let sa = fit_ols(&build_har_design(&data, &HarSpec::new(HarFamily::Rs, true)).unwrap()).unwrap();
        assert!(sa.r_squared >= plain.r_squared - 1e-12);
    }

    #[test]
    fn predict_rejects_column_mismatch() {
        let d = random_design(50, 3, 5);
        let f = fit_ols(&d).unwrap();
        let other = random_design(50, 2, 6);
        assert!(predict(&f, &other).is_err());
        let zero_row = vec![0.0; 3];
        assert_eq!(f.predict_row(&zero_row).unwrap(), f.intercept);
    }
}
