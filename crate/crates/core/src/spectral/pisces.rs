use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

pub const PISCES_TOL: f64 = 1e-6;
pub const PISCES_MAX_ITER: usize = 100;
const SYMMETRY_TOL: f64 = 1e-10;
const GAP_TOL: f64 = 1e-10;

/// Largest admissible smoothing parameter, `1 / (4 sqrt 2 + 2)`.
pub fn alpha_max() -> f64 {
    1.0 / (4.0 * std::f64::consts::SQRT_2 + 2.0)
}

fn symmetrized(m: &Mat) -> Result<Mat> {
    linalg::ensure_square(m, "projector input")?;
    let scale = m.abs().max().max(1.0);
    let asym = (m - m.transpose()).abs().max();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Eigenvectors of the `k` largest eigenvalues, with the sign convention, and
/// whether eigenvalues `k` and `k+1` are numerically tied.
fn leading_eigenvectors(m: &Mat, k: usize) -> Result<(Mat, bool)> {
    let sym = symmetrized(m)?;
    let q = sym.nrows();
    if k == 0 || k > q {
        return Err(Error::Config(format!("cannot take {k} eigenvectors of a {q}x{q} matrix")));
    }
    let (vals, mut vecs) = linalg::symmetric_eigen_desc(&sym);
    for j in 0..k {
        let sign = linalg::canonical_sign(&linalg::column_vec(&vecs, j));
        vecs.column_mut(j).scale_mut(sign);
    }
    let tied = k < q && (vals[k - 1] - vals[k]).abs() <= GAP_TOL * vals[0].abs().max(1.0);
    Ok((vecs.columns(0, k).into_owned(), tied))
}

/// `Pi(M; K)`: projector onto the `K` leading eigenvectors of symmetric `M`.
pub fn project_top_k(m: &Mat, k: usize) -> Result<Mat> {
    let (v, tied) = leading_eigenvectors(m, k)?;
    if tied {
        log::warn!("eigenvalues {k} and {} are tied; projector is not unique", k + 1);
    }
    Ok(&v * v.transpose())
}

/// Orthonormal `q x K` basis spanning the leading eigenspace of a projector.
pub fn extract_basis_from_projector(u: &Mat, k: usize) -> Result<Mat> {
    let (v, tied) = leading_eigenvectors(u, k)?;
    if tied {
        log::warn!("projector eigenvalues {k} and {} are tied; basis is ambiguous", k + 1);
    }
    Ok(v)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiscesOutput {
    #[serde(with = "linalg::rows_list")]
    pub smoothed: Vec<Mat>,
    pub iterations: usize,
    pub converged: bool,
}

/// Smooths a chain of rank-`K_m` projectors.
///
/// Each sweep replaces season `m` by `Pi(U_m + alpha (Ubar_{m-1} + Ubar_{m+1}); K_m)`
/// using the previous sweep's neighbours; the first and last seasons have a
/// single neighbour. `alpha = 0` returns the inputs unchanged.
pub fn pisces_smooth(u: &[Mat], alpha: f64, ks: &[usize]) -> Result<PiscesOutput> {
    if u.is_empty() || u.len() != ks.len() {
        return Err(Error::Config("PisCES needs one rank per projector".into()));
    }
    if !(0.0..=alpha_max() + 1e-15).contains(&alpha) {
        return Err(Error::Config(format!(
            "alpha {alpha} outside [0, {:.6}]",
            alpha_max()
        )));
    }
    if alpha == 0.0 {
        return Ok(PiscesOutput {
            smoothed: u.to_vec(),
            iterations: 0,
            converged: true,
        });
    }
    let s = u.len();
    let mut cur: Vec<Mat> = u.to_vec();
    for iter in 1..=PISCES_MAX_ITER {
        let next = (0..s)
            .map(|m| {
                let mut acc = u[m].clone();
                if m > 0 {
                    acc += &cur[m - 1] * alpha;
                }
                if m + 1 < s {
                    acc += &cur[m + 1] * alpha;
                }
                project_top_k(&acc, ks[m])
            })
            .collect::<Result<Vec<_>>>()?;
        let change = next
            .iter()
            .zip(&cur)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        cur = next;
        if change < PISCES_TOL {
            return Ok(PiscesOutput {
                smoothed: cur,
                iterations: iter,
                converged: true,
            });
        }
    }
    log::warn!("PisCES did not converge in {PISCES_MAX_ITER} iterations");
    Ok(PiscesOutput {
        smoothed: cur,
        iterations: PISCES_MAX_ITER,
        converged: false,
    })
}
