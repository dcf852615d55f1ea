use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::transition::TransitionSet;

/// Row norms below this are treated as zero.
pub const ZERO_ROW_TOL: f64 = 1e-12;

/// `sum_h Phi'_{h,m}` for season `m` (1-based). VHAR seasons are the daily,
/// weekly and monthly components; a VAR has the single season 1.
pub fn seasonal_autoregressive_matrix(est: &TransitionSet, m: usize) -> Result<Mat> {
    let lags: Vec<&Mat> = match est {
        TransitionSet::Var { lags, .. } if m == 1 => lags.iter().collect(),
        TransitionSet::Pvar { seasons, .. } if (1..=seasons.len()).contains(&m) => {
            seasons[m - 1].iter().collect()
        }
        TransitionSet::Vhar {
            daily,
            weekly,
            monthly,
            ..
        } if (1..=3).contains(&m) => vec![[daily, weekly, monthly][m - 1]],
        _ => {
            return Err(Error::Config(format!(
                "season {m} does not exist for a {} model",
                est.kind_name()
            )))
        }
    };
    let q = est.q();
    Ok(lags
        .into_iter()
        .fold(Mat::zeros(q, q), |acc, phi| acc + phi.transpose()))
}

/// Seasonal matrices of every season in order.
pub fn seasonal_matrices(est: &TransitionSet) -> Result<Vec<Mat>> {
    let s = match est {
        TransitionSet::Vhar { .. } => 3,
        _ => est.season_count(),
    };
    (1..=s).map(|m| seasonal_autoregressive_matrix(est, m)).collect()
}

/// Leading singular vectors of one seasonal matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingularBlock {
    #[serde(with = "linalg::rows")]
    pub x_l: Mat,
    #[serde(with = "linalg::rows")]
    pub x_r: Mat,
    /// All singular values, decreasing.
    pub singular_values: Vec<f64>,
    /// Some requested vector belongs to a (numerically) zero singular value.
    pub rank_deficient: bool,
}

/// Top `k_left` left and `k_right` right singular vectors.
///
/// Each left vector is signed so its largest-magnitude entry is positive and
/// its right partner takes the same sign, keeping `M = sum s_k l_k r_k'`.
/// Right vectors beyond `k_left` are signed by their own largest entry.
pub fn top_singular_vectors(m: &Mat, k_left: usize, k_right: usize) -> Result<SingularBlock> {
    linalg::ensure_square(m, "seasonal matrix")?;
    let q = m.nrows();
    if k_left > q || k_right > q || k_left == 0 || k_right == 0 {
        return Err(Error::Config(format!(
            "requested {k_left} left / {k_right} right vectors from a {q}x{q} matrix"
        )));
    }
    let svd = linalg::sorted_svd(m)?;
    let mut u = svd.u;
    let mut v = svd.v;
    for k in 0..q {
        let source = if k < k_left { &u } else { &v };
        let sign = linalg::canonical_sign(&linalg::column_vec(source, k));
        u.column_mut(k).scale_mut(sign);
        v.column_mut(k).scale_mut(sign);
    }
    let sv = svd.singular_values;
    let top = sv.first().copied().unwrap_or(0.0);
    let kmax = k_left.max(k_right);
    let rank_deficient = sv[kmax - 1] <= 1e-12 * top.max(f64::MIN_POSITIVE);
    Ok(SingularBlock {
        x_l: u.columns(0, k_left).into_owned(),
        x_r: v.columns(0, k_right).into_owned(),
        singular_values: sv,
        rank_deficient,
    })
}

/// Scales each row to unit length. Returns the indices of rows left at zero.
pub fn row_normalize(x: &Mat) -> (Mat, Vec<usize>) {
    let mut out = x.clone();
    let mut zero = Vec::new();
    for i in 0..x.nrows() {
        let norm = x.row(i).norm();
        if norm < ZERO_ROW_TOL {
            out.row_mut(i).fill(0.0);
            zero.push(i);
        } else {
            out.row_mut(i).unscale_mut(norm);
        }
    }
    (out, zero)
}
