//! Dense linear-algebra helpers shared by the estimation and clustering code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Mat = DMatrix<f64>;

/// Thin SVD with singular values sorted in decreasing order.
#[derive(Clone, Debug)]
pub struct SortedSvd {
    pub u: Mat,
    pub singular_values: Vec<f64>,
    pub v: Mat,
}

pub fn sorted_svd(m: &Mat) -> Result<SortedSvd> {
    ensure_finite(m, "svd input")?;
    let svd = m.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("svd did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("svd did not return V'".into()))?;
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let u = Mat::from_fn(u.nrows(), order.len(), |i, k| u[(i, order[k])]);
    let v = Mat::from_fn(v_t.ncols(), order.len(), |i, k| v_t[(order[k], i)]);
    let singular_values = order.iter().map(|&k| sv[k]).collect();
    Ok(SortedSvd {
        u,
        singular_values,
        v,
    })
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues in decreasing order.
pub fn symmetric_eigen_desc(m: &Mat) -> (Vec<f64>, Mat) {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let vecs = Mat::from_fn(m.nrows(), order.len(), |i, k| {
        eig.eigenvectors[(i, order[k])]
    });
    (order.iter().map(|&k| vals[k]).collect(), vecs)
}

/// Flips the sign of `col` so that its largest-magnitude entry is positive.
/// Ties resolve to the smallest index. Returns the sign applied.
pub fn canonical_sign(col: &[f64]) -> f64 {
    let mut best = 0usize;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, &x) in col.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if col.is_empty() || col[best] >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn column_vec(m: &Mat, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

pub fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn ensure_square(m: &Mat, what: &str) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

pub fn trace(m: &Mat) -> f64 {
    m.diagonal().sum()
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Horizontal concatenation `(a | b)`.
pub fn hstack(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "cannot concatenate {} rows with {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols()))
        .copy_from(b);
    Ok(out)
}

pub fn dvector(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

/// Serde adapters writing matrices as row-major nested arrays.
pub mod rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Mat;

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Row-major serde adapter for `Vec<Mat>`.
pub mod rows_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Mat;

    pub fn serialize<S: Serializer>(ms: &[Mat], s: S) -> Result<S::Ok, S::Error> {
        ms.iter()
            .map(super::to_rows)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat>, D::Error> {
        Vec::<Vec<Vec<f64>>>::deserialize(d)?
            .iter()
            .map(|r| super::from_rows(r).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Row-major serde adapter for `Vec<Vec<Mat>>`.
pub mod rows_table {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Mat;

    pub fn serialize<S: Serializer>(ms: &[Vec<Mat>], s: S) -> Result<S::Ok, S::Error> {
        ms.iter()
            .map(|row| row.iter().map(super::to_rows).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Mat>>, D::Error> {
        Vec::<Vec<Vec<Vec<f64>>>>::deserialize(d)?
            .iter()
            .map(|season| {
                season
                    .iter()
                    .map(|r| super::from_rows(r).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_svd_orders_values() {
        let m = Mat::from_diagonal(&dvector(&[1.0, 3.0, 2.0]));
        let svd = sorted_svd(&m).unwrap();
        assert_eq!(svd.singular_values, vec![3.0, 2.0, 1.0]);
        let rebuilt = &svd.u * Mat::from_diagonal(&dvector(&svd.singular_values)) * svd.v.transpose();
        assert!((rebuilt - m).norm() < 1e-12);
    }

    #[test]
    fn canonical_sign_prefers_first_of_ties() {
        assert_eq!(canonical_sign(&[-1.0, 1.0]), -1.0);
        assert_eq!(canonical_sign(&[0.5, -2.0]), -1.0);
        assert_eq!(canonical_sign(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn hstack_rejects_row_mismatch() {
        assert!(hstack(&Mat::zeros(2, 1), &Mat::zeros(3, 1)).is_err());
        let h = hstack(&Mat::identity(2, 2), &Mat::zeros(2, 1)).unwrap();
        assert_eq!(h.shape(), (2, 3));
    }
}
