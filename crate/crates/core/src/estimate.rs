//! Least-squares estimation of VAR, PVAR and VHAR coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::simulate::TimeSeriesPanel;
use crate::transition::{TransitionSet, VHAR_LAGS, WEEK};

/// Designs with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimationResult {
    pub transitions: TransitionSet,
    /// One matrix per season (a single entry for VAR and VHAR).
    #[serde(with = "linalg::rows_list")]
    pub residual_covariance: Vec<Mat>,
    pub design_condition: Vec<f64>,
}

/// Solution of `Z ~ X B`.
#[derive(Clone, Debug)]
pub struct OlsFit {
    pub coef: Mat,
    pub residuals: Mat,
    pub condition: f64,
}

/// Least squares through the SVD of the design.
pub fn ols(x: &Mat, z: &Mat, regression: &str) -> Result<OlsFit> {
    if x.nrows() != z.nrows() {
        return Err(Error::Dimension(format!(
            "{regression}: design has {} rows, response {}",
            x.nrows(),
            z.nrows()
        )));
    }
    linalg::ensure_finite(x, regression)?;
    linalg::ensure_finite(z, regression)?;
    let k = x.ncols();
    if x.nrows() < k || k == 0 {
        return Err(Error::SingularDesign {
            regression: regression.to_string(),
            condition: f64::INFINITY,
        });
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign {
            regression: regression.to_string(),
            condition,
        });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut utz = u.transpose() * z;
    for (i, mut row) in utz.row_iter_mut().enumerate() {
        row /= svd.singular_values[i];
    }
    let coef = v_t.transpose() * utz;
    let residuals = z - x * &coef;
    Ok(OlsFit {
        coef,
        residuals,
        condition,
    })
}

fn residual_cov(res: &Mat) -> Mat {
    res.transpose() * res / res.nrows() as f64
}

/// Row `t` of the design holds `(Y_{t-1}, ..., Y_{t-p})`.
fn lag_design(data: &Mat, rows: &[usize], p: usize) -> (Mat, Mat) {
    let q = data.ncols();
    let x = Mat::from_fn(rows.len(), q * p, |r, c| data[(rows[r] - 1 - c / q, c % q)]);
    let z = Mat::from_fn(rows.len(), q, |r, c| data[(rows[r], c)]);
    (x, z)
}

fn split_lags(coef: &Mat, q: usize, p: usize) -> Vec<Mat> {
    (0..p)
        .map(|h| coef.rows(h * q, q).transpose())
        .collect()
}

pub fn estimate_var(panel: &TimeSeriesPanel, p: usize) -> Result<EstimationResult> {
    panel.validate()?;
    if p == 0 {
        return Err(Error::Config("lag order must be positive".into()));
    }
    let (t_len, q) = (panel.t_len(), panel.q());
    if t_len <= p {
        return Err(Error::SingularDesign {
            regression: "VAR".into(),
            condition: f64::INFINITY,
        });
    }
    let rows: Vec<usize> = (p..t_len).collect();
    let (x, z) = lag_design(&panel.data, &rows, p);
    let fit = ols(&x, &z, "VAR")?;
    Ok(EstimationResult {
        transitions: TransitionSet::var(split_lags(&fit.coef, q, p)),
        residual_covariance: vec![residual_cov(&fit.residuals)],
        design_condition: vec![fit.condition],
    })
}

/// Per-season regressions. Row `t` belongs to season `t mod s + 1` and is
/// regressed on the `p_m` preceding rows, whatever their season.
pub fn estimate_pvar(panel: &TimeSeriesPanel, s: usize, lags: &[usize]) -> Result<EstimationResult> {
    panel.validate()?;
    if s == 0 || lags.len() != s {
        return Err(Error::Config(format!(
            "need one lag order per season: s={s}, got {} orders",
            lags.len()
        )));
    }
    if lags.contains(&0) {
        return Err(Error::Config("lag orders must be positive".into()));
    }
    let (t_len, q) = (panel.t_len(), panel.q());
    let fits = (0..s)
        .into_par_iter()
        .map(|m| {
            let p = lags[m];
            let rows: Vec<usize> = (p..t_len).filter(|t| t % s == m).collect();
            let (x, z) = lag_design(&panel.data, &rows, p);
            ols(&x, &z, &format!("PVAR season {}", m + 1))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimationResult {
        transitions: TransitionSet::pvar(
            fits.iter()
                .zip(lags)
                .map(|(f, &p)| split_lags(&f.coef, q, p))
                .collect(),
        ),
        residual_covariance: fits.iter().map(|f| residual_cov(&f.residuals)).collect(),
        design_condition: fits.iter().map(|f| f.condition).collect(),
    })
}

/// Daily, weekly-average and monthly-average regressors for rows `t >= 22`.
pub fn vhar_design(data: &Mat) -> (Mat, Mat) {
    let q = data.ncols();
    let rows: Vec<usize> = (VHAR_LAGS..data.nrows()).collect();
    let mut x = Mat::zeros(rows.len(), 3 * q);
    for (r, &t) in rows.iter().enumerate() {
        for j in 0..q {
            let lag = |h: usize| data[(t - h, j)];
            x[(r, j)] = lag(1);
            x[(r, q + j)] = (1..=WEEK).map(lag).sum::<f64>() / WEEK as f64;
            x[(r, 2 * q + j)] = (1..=VHAR_LAGS).map(lag).sum::<f64>() / VHAR_LAGS as f64;
        }
    }
    let z = Mat::from_fn(rows.len(), q, |r, c| data[(rows[r], c)]);
    (x, z)
}

pub fn estimate_vhar(panel: &TimeSeriesPanel) -> Result<EstimationResult> {
    panel.validate()?;
    let q = panel.q();
    if panel.t_len() <= VHAR_LAGS + 3 * q {
        return Err(Error::SingularDesign {
            regression: "VHAR".into(),
            condition: f64::INFINITY,
        });
    }
    let (x, z) = vhar_design(&panel.data);
    let fit = ols(&x, &z, "VHAR")?;
    let mut parts = split_lags(&fit.coef, q, 3).into_iter();
    let (d, w, m) = (
        parts.next().unwrap(),
        parts.next().unwrap(),
        parts.next().unwrap(),
    );
    Ok(EstimationResult {
        transitions: TransitionSet::vhar(d, w, m),
        residual_covariance: vec![residual_cov(&fit.residuals)],
        design_condition: vec![fit.condition],
    })
}

/// Dispatches on the kind of `template`, using its lag metadata.
pub fn estimate_like(panel: &TimeSeriesPanel, template: &TransitionSet) -> Result<EstimationResult> {
    match template {
        TransitionSet::Var { lags, .. } => estimate_var(panel, lags.len()),
        TransitionSet::Pvar { .. } => {
            estimate_pvar(panel, template.season_count(), &template.lag_orders())
        }
        TransitionSet::Vhar { .. } => estimate_vhar(panel),
    }
}
