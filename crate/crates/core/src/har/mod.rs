//! Log-HAR model family with optional state-adaptive spillover regressors.

mod design;
mod lasso;
mod ols;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MeasureKind;
use crate::numeric::LOG_OFFSET;

pub use design::{build_har_design, direct_horizon_target, HarColumn, HarData, HarDesign, HAR_HORIZONS, HAR_MAX_LAG};
pub use lasso::{fit_lasso, lasso_coordinate_descent, soft_threshold, LassoConfig, LassoTrace};
pub use ols::fit_ols;

/// Component set `K` of one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HarFamily {
    #[serde(rename = "RV")]
    Rv,
    #[serde(rename = "CJ")]
    Cj,
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "REX")]
    Rex,
}

impl HarFamily {
    pub const ALL: [HarFamily; 4] = [HarFamily::Rv, HarFamily::Cj, HarFamily::Rs, HarFamily::Rex];

    pub fn kinds(self) -> &'static [MeasureKind] {
        match self {
            HarFamily::Rv => &[MeasureKind::Rv],
            HarFamily::Cj => &[MeasureKind::Cv, MeasureKind::Cj],
            HarFamily::Rs => &[MeasureKind::RsPlus, MeasureKind::RsMinus],
            HarFamily::Rex => &[MeasureKind::RexPlus, MeasureKind::RexMinus, MeasureKind::RexMod],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HarFamily::Rv => "RV",
            HarFamily::Cj => "CJ",
            HarFamily::Rs => "RS",
            HarFamily::Rex => "REX",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    None,
    Lasso(LassoConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarSpec {
    pub family: HarFamily,
    pub include_spillover: bool,
    pub regularization: Regularization,
    pub log_offset: f64,
}

impl HarSpec {
    pub fn new(family: HarFamily, include_spillover: bool) -> Self {
        Self {
            family,
            include_spillover,
            regularization: Regularization::None,
            log_offset: LOG_OFFSET,
        }
    }

    pub fn lasso(family: HarFamily, cfg: LassoConfig) -> Self {
        Self {
            family,
            include_spillover: true,
            regularization: Regularization::Lasso(cfg),
            log_offset: LOG_OFFSET,
        }
    }

    /// The eleven variants compared out of sample.
    pub fn standard_models() -> Vec<HarSpec> {
        let mut out: Vec<HarSpec> = HarFamily::ALL.iter().map(|f| HarSpec::new(*f, false)).collect();
        out.extend(HarFamily::ALL.iter().map(|f| HarSpec::new(*f, true)));
        out.extend(
            [HarFamily::Cj, HarFamily::Rs, HarFamily::Rex]
                .iter()
                .map(|f| HarSpec::lasso(*f, LassoConfig::default())),
        );
        out
    }

    pub fn is_lasso(&self) -> bool {
        matches!(self.regularization, Regularization::Lasso(_))
    }

    pub fn name(&self) -> String {
        let mut s = String::new();
        if self.is_lasso() {
            s.push_str("Lasso-");
        }
        if self.include_spillover {
            s.push_str("SA-");
        }
        s.push_str("Log-HAR-");
        s.push_str(self.family.label());
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.log_offset >= 0.0 && self.log_offset.is_finite()) {
            return Err(Error::invalid("log offset must be finite and non-negative"));
        }
        if let Regularization::Lasso(cfg) = &self.regularization {
            cfg.validate()?;
        }
        Ok(())
    }
}

impl fmt::Display for HarSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for HarSpec {
    type Err = Error;

    /// Parses names such as `Log-HAR-RV`, `SA-Log-HAR-CJ`, `Lasso-SA-Log-HAR-REX`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unknown model name `{s}`"));
        let (lasso, rest) = match s.strip_prefix("Lasso-") {
            Some(r) => (true, r),
            None => (false, s),
        };
        let (sa, rest) = match rest.strip_prefix("SA-") {
            Some(r) => (true, r),
            None => (false, rest),
        };
        let fam = rest.strip_prefix("Log-HAR-").ok_or_else(bad)?;
        let family = HarFamily::ALL.into_iter().find(|f| f.label() == fam).ok_or_else(bad)?;
        if lasso {
            let mut spec = HarSpec::lasso(family, LassoConfig::default());
            spec.include_spillover = sa;
            Ok(spec)
        } else {
            Ok(HarSpec::new(family, sa))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarTerm {
    pub column: HarColumn,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarFit {
    pub model: String,
    pub intercept: f64,
    pub intercept_std_error: Option<f64>,
    pub terms: Vec<HarTerm>,
    pub residual_variance: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub lambda: Option<f64>,
    pub converged: bool,
}

impl HarFit {
    pub fn slopes(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.estimate).collect()
    }

    pub fn columns(&self) -> Vec<HarColumn> {
        self.terms.iter().map(|t| t.column).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.terms.len() {
            return Err(Error::Shape(format!(
                "row has {} regressors, fit has {}",
                row.len(),
                self.terms.len()
            )));
        }
        Ok(self.intercept + self.terms.iter().zip(row).map(|(t, x)| t.estimate * x).sum::<f64>())
    }
}

/// Linear prediction on the log scale for every row of `design`.
pub fn predict(fit: &HarFit, design: &HarDesign) -> Result<Vec<f64>> {
    if design.columns != fit.columns() {
        return Err(Error::Shape(format!("design columns do not match fitted model {}", fit.model)));
    }
    (0..design.n_rows()).map(|r| fit.predict_row(&design.row(r))).collect()
}

/// Fit `spec` on `design` with its configured estimator.
pub fn fit_har(design: &HarDesign, spec: &HarSpec) -> Result<HarFit> {
    let mut fit = match &spec.regularization {
        Regularization::None => fit_ols(design)?,
        Regularization::Lasso(cfg) => fit_lasso(design, cfg)?,
    };
    fit.model = spec.name();
    Ok(fit)
}

/// Goodness-of-fit block shared by both estimators; `k` counts the intercept.
pub(crate) fn fit_statistics(y: &[f64], fitted: &[f64], k: usize) -> (f64, f64, f64, f64, f64) {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let sse: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let sst: f64 = y.iter().map(|a| (a - ybar) * (a - ybar)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let slopes = k.saturating_sub(1) as f64;
    let adj = if n - slopes - 1.0 > 0.0 {
        1.0 - (1.0 - r2) * (n - 1.0) / (n - slopes - 1.0)
    } else {
        f64::NAN
    };
    let ll_term = n * (sse / n).ln();
    let aic = ll_term + 2.0 * k as f64;
    let bic = ll_term + k as f64 * n.ln();
    let dof = (n - k as f64).max(1.0);
    (sse / dof, r2, adj, aic, bic)
}
