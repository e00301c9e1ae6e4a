use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::HarSpec;
use crate::error::{Error, Result};
use crate::measures::MeasureKind;

pub const HAR_HORIZONS: [usize; 3] = [1, 5, 22];
pub const HAR_MAX_LAG: usize = 22;

/// One regressor: a trailing-mean lag of a component, or the spillover feature of a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HarColumn {
    pub component: MeasureKind,
    /// `None` for the spillover feature column.
    pub horizon: Option<usize>,
}

impl fmt::Display for HarColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.horizon {
            Some(h) => write!(f, "log_{}_h{h}", self.component),
            None => write!(f, "X_{}", self.component),
        }
    }
}

/// Daily inputs for one target asset, all aligned on `dates`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HarData {
    pub dates: Vec<NaiveDate>,
    pub rv: Vec<f64>,
    /// The target's own component series.
    pub components: BTreeMap<MeasureKind, Vec<f64>>,
    /// `X_t` per component; `None` where undefined (the first day).
    pub features: BTreeMap<MeasureKind, Vec<Option<f64>>>,
}

impl HarData {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dates.len();
        if self.rv.len() != n
            || self.components.values().any(|v| v.len() != n)
            || self.features.values().any(|v| v.len() != n)
        {
            return Err(Error::Shape("HAR inputs are not aligned on the date index".into()));
        }
        if self.dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("HAR dates must be strictly increasing"));
        }
        for (name, series) in std::iter::once(("RV".to_string(), &self.rv))
            .chain(self.components.iter().map(|(k, v)| (k.to_string(), v)))
        {
            if let Some(i) = series.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!("{name} value {} on {} is invalid", series[i], self.dates[i])));
            }
        }
        Ok(())
    }

    /// Days `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> HarData {
        HarData {
            dates: self.dates[start..end].to_vec(),
            rv: self.rv[start..end].to_vec(),
            components: self.components.iter().map(|(k, v)| (*k, v[start..end].to_vec())).collect(),
            features: self.features.iter().map(|(k, v)| (*k, v[start..end].to_vec())).collect(),
        }
    }

    fn component(&self, kind: MeasureKind) -> Result<&[f64]> {
        match self.components.get(&kind) {
            Some(v) => Ok(v),
            None if kind == MeasureKind::Rv => Ok(&self.rv),
            None => Err(Error::invalid(format!("HAR input lacks the {kind} component"))),
        }
    }

    pub fn columns(&self, spec: &HarSpec) -> Vec<HarColumn> {
        let kinds = spec.family.kinds();
        let mut cols: Vec<HarColumn> = kinds
            .iter()
            .flat_map(|k| {
                HAR_HORIZONS.iter().map(move |h| HarColumn {
                    component: *k,
                    horizon: Some(*h),
                })
            })
            .collect();
        if spec.include_spillover {
            cols.extend(kinds.iter().map(|k| HarColumn {
                component: *k,
                horizon: None,
            }));
        }
        cols
    }

    /// Regressors for a response dated at index `t`, built from days `< t` only.
    /// `t == len()` gives the row for the day after the sample. `None` when a
    /// spillover feature is undefined.
    pub fn regressors(&self, spec: &HarSpec, t: usize) -> Result<Option<Vec<f64>>> {
        if t < HAR_MAX_LAG || t > self.len() {
            return Err(Error::invalid(format!("no HAR regressors for row {t} of {}", self.len())));
        }
        let delta = spec.log_offset;
        let mut row = Vec::with_capacity(12);
        for kind in spec.family.kinds() {
            let v = self.component(*kind)?;
            for h in HAR_HORIZONS {
                let m = v[t - h..t].iter().sum::<f64>() / h as f64;
                row.push((m + delta).ln());
            }
        }
        if spec.include_spillover {
            for kind in spec.family.kinds() {
                let x = self
                    .features
                    .get(kind)
                    .ok_or_else(|| Error::invalid(format!("spillover feature for {kind} missing")))?;
                match x[t - 1] {
                    Some(v) => row.push((v + delta).ln()),
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(row))
    }
}

/// Regressor matrix (no intercept column) with its response and row dates.
#[derive(Debug, Clone, PartialEq)]
pub struct HarDesign {
    pub columns: Vec<HarColumn>,
    pub x: DMatrix<f64>,
    pub response: Vec<f64>,
    pub dates: Vec<NaiveDate>,
    /// Index into the source `HarData` of each response day.
    pub rows: Vec<usize>,
}

impl HarDesign {
    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.x.row(r).iter().copied().collect()
    }

    /// Replace the response by the mean of the next `h` log-RV values from each row's
    /// origin, dropping rows whose target runs past the sample.
    pub fn with_horizon(&self, log_rv: &[f64], h: usize) -> Result<HarDesign> {
        let target = direct_horizon_target(log_rv, h)?;
        let keep: Vec<usize> = (0..self.n_rows()).filter(|r| self.rows[*r] - 1 < target.len()).collect();
        let x = DMatrix::from_fn(keep.len(), self.x.ncols(), |r, c| self.x[(keep[r], c)]);
        Ok(HarDesign {
            columns: self.columns.clone(),
            x,
            response: keep.iter().map(|r| target[self.rows[*r] - 1]).collect(),
            dates: keep.iter().map(|r| self.dates[*r]).collect(),
            rows: keep.iter().map(|r| self.rows[*r]).collect(),
        })
    }
}

/// `target_t = mean(log_rv[t+1..=t+h])`; the last `h` origins are dropped.
pub fn direct_horizon_target(log_rv: &[f64], h: usize) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if log_rv.len() < h + 1 {
        return Err(Error::InsufficientData {
            what: format!("{h}-step direct target"),
            needed: h + 1,
            got: log_rv.len(),
        });
    }
    Ok((0..log_rv.len() - h)
        .map(|t| log_rv[t + 1..=t + h].iter().sum::<f64>() / h as f64)
        .collect())
}

/// Log-HAR design with response `ln(RV_t + delta)`; the first 22 days are consumed by lags.
pub fn build_har_design(data: &HarData, spec: &HarSpec) -> Result<HarDesign> {
    spec.validate()?;
    data.validate()?;
    if data.len() < HAR_MAX_LAG + 1 {
        return Err(Error::InsufficientData {
            what: "HAR design".into(),
            needed: HAR_MAX_LAG + 1,
            got: data.len(),
        });
    }
    let columns = data.columns(spec);
    let mut rows = Vec::new();
    let mut flat = Vec::new();
    for t in HAR_MAX_LAG..data.len() {
        if let Some(r) = data.regressors(spec, t)? {
            rows.push(t);
            flat.extend(r);
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData {
            what: "HAR design rows".into(),
            needed: 1,
            got: 0,
        });
    }
    let x = DMatrix::from_row_slice(rows.len(), columns.len(), &flat);
    Ok(HarDesign {
        columns,
        x,
        response: rows.iter().map(|t| (data.rv[*t] + spec.log_offset).ln()).collect(),
        dates: rows.iter().map(|t| data.dates[*t]).collect(),
        rows,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::har::HarFamily;
    use chrono::Duration;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_data(n: usize, seed: u64, with_features: bool) -> HarData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut d = HarData {
            dates: (0..n).map(|i| start + Duration::days(i as i64)).collect(),
            rv: (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
            ..Default::default()
        };
        for k in MeasureKind::ALL {
            d.components.insert(k, (0..n).map(|_| rng.random_range(0.1..1.0)).collect());
            if with_features {
                let mut x: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random_range(0.1..1.0))).collect();
                x[0] = None;
                d.features.insert(k, x);
            }
        }
        d.components.insert(MeasureKind::Rv, d.rv.clone());
        d
    }

    #[test]
    fn constant_panel_gives_constant_columns() {
        let mut d = random_data(40, 1, true);
        for v in d.components.values_mut() {
            v.iter_mut().for_each(|x| *x = 0.3);
        }
        let spec = HarSpec::new(HarFamily::Rs, false);
        let des = build_har_design(&d, &spec).unwrap();
        let c = (0.3f64 + 1e-8).ln();
        assert!(des.x.iter().all(|v| (v - c).abs() < 1e-14));
    }

    #[test]
    fn weekly_column_matches_rolling_mean() {
        let d = random_data(80, 2, false);
        let spec = HarSpec::new(HarFamily::Rv, false);
        let des = build_har_design(&d, &spec).unwrap();
        for r in 0..des.n_rows() {
            let t = des.rows[r];
            let mut s = 0.0;
            for lag in 1..=5 {
                s += d.rv[t - lag];
            }
            assert!((des.x[(r, 1)] - (s / 5.0 + 1e-8).ln()).abs() < 1e-12);
            assert_eq!(des.x[(r, 0)], (d.rv[t - 1] + 1e-8).ln());
        }
    }

    #[test]
    fn row_accounting() {
        let d = random_data(100, 3, true);
        let plain = build_har_design(&d, &HarSpec::new(HarFamily::Cj, false)).unwrap();
        assert_eq!(plain.n_rows(), 100 - 22);
        assert_eq!(plain.x.ncols(), 6);
        let sa = build_har_design(&d, &HarSpec::new(HarFamily::Rex, true)).unwrap();
        assert_eq!(sa.x.ncols(), 12);
        assert_eq!(sa.n_rows(), 78);
        let mut late = d.clone();
        for v in late.features.values_mut() {
            v[21] = None;
        }
        let sa = build_har_design(&late, &HarSpec::new(HarFamily::Rv, true)).unwrap();
        assert_eq!(sa.n_rows(), 77);
        assert!(build_har_design(&d.slice(0, 22), &HarSpec::new(HarFamily::Rv, false)).is_err());
    }

    #[test]
    fn regressors_ignore_the_response_day_and_later() {
        let d = random_data(60, 4, true);
        let spec = HarSpec::new(HarFamily::Rex, true);
        let base = d.regressors(&spec, 40).unwrap().unwrap();
        let mut altered = d.clone();
        for t in 40..60 {
            altered.rv[t] = 9.0;
            for v in altered.components.values_mut() {
                v[t] = 9.0;
            }
            for v in altered.features.values_mut() {
                v[t] = Some(9.0);
            }
        }
        assert_eq!(altered.regressors(&spec, 40).unwrap().unwrap(), base);
        assert_eq!(d.slice(0, 40).regressors(&spec, 40).unwrap().unwrap(), base);
    }

    #[test]
    fn direct_target_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..50).map(|_| rng.random_range(-3.0..0.0)).collect();
        assert_eq!(direct_horizon_target(&s, 1).unwrap(), s[1..].to_vec());
        let t5 = direct_horizon_target(&s, 5).unwrap();
        assert_eq!(t5.len(), 45);
        for (t, v) in t5.iter().enumerate() {
            let mut acc = 0.0;
            for k in 1..=5 {
                acc += s[t + k];
            }
            assert!((v - acc / 5.0).abs() < 1e-14);
        }
        assert!(direct_horizon_target(&[1.0; 22], 22).is_err());
        assert!(direct_horizon_target(&[2.0; 30], 22).unwrap().iter().all(|v| *v == 2.0));
    }

    #[test]
    fn horizon_design_aligns_with_target() {
        let d = random_data(70, 6, false);
        let spec = HarSpec::new(HarFamily::Rv, false);
        let des = build_har_design(&d, &spec).unwrap();
        let lrv: Vec<f64> = d.rv.iter().map(|v| (v + 1e-8).ln()).collect();
        let h1 = des.with_horizon(&lrv, 1).unwrap();
        assert_eq!(h1.response, des.response);
        let h5 = des.with_horizon(&lrv, 5).unwrap();
        assert_eq!(h5.n_rows(), des.n_rows() - 4);
        let t = h5.rows[0];
        let want = lrv[t..t + 5].iter().sum::<f64>() / 5.0;
        assert!((h5.response[0] - want).abs() < 1e-14);
    }
}
