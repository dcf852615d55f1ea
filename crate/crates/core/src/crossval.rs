//! Choosing the PisCES smoothing parameter by dyad-fold cross-validation.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::seed::{derive_seed2, rng_from_seed, Rng};
use crate::spectral::{alpha_max, spectral_cocluster, ClusterOptions, KMeansOptions, SeasonRanks};

pub const DEFAULT_FOLDS: usize = 5;
pub const GRID_SIZE: usize = 20;
pub const GRID_MIN_RATIO: f64 = 0.01;

/// Fold id (1..=M) of every off-diagonal entry, per season. Diagonal entries are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub q: usize,
    pub folds: usize,
    pub ids: Vec<Vec<Vec<u32>>>,
}

impl FoldAssignment {
    pub fn season_count(&self) -> usize {
        self.ids.len()
    }

    pub fn fold_sizes(&self, season: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &id in self.ids[season].iter().flatten() {
            if id > 0 {
                sizes[id as usize - 1] += 1;
            }
        }
        sizes
    }
}

/// Shuffles the `q(q-1)` ordered off-diagonal pairs of every season and deals
/// them round-robin into `m` folds.
pub fn make_folds(q: usize, s: usize, m: usize, rng: &mut Rng) -> Result<FoldAssignment> {
    if q < 2 || m < 2 || s == 0 {
        return Err(Error::Config(format!("need q >= 2, s >= 1 and at least 2 folds (got q={q}, s={s}, M={m})")));
    }
    let dyads = q * (q - 1);
    if m > dyads {
        return Err(Error::Config(format!("{m} folds exceed the {dyads} off-diagonal dyads")));
    }
    let mut ids = Vec::with_capacity(s);
    for _ in 0..s {
        let mut pairs: Vec<(usize, usize)> = (0..q)
            .flat_map(|i| (0..q).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        pairs.shuffle(rng);
        let mut table = vec![vec![0u32; q]; q];
        for (n, (i, j)) in pairs.into_iter().enumerate() {
            table[i][j] = (n % m) as u32 + 1;
        }
        ids.push(table);
    }
    Ok(FoldAssignment { q, folds: m, ids })
}

/// Candidate smoothing values in increasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    pub values: Vec<f64>,
}

impl AlphaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("empty alpha grid".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("alpha grid must be strictly increasing".into()));
        }
        if values.iter().any(|&a| !(a > 0.0 && a <= alpha_max())) {
            return Err(Error::Config(format!("alpha grid values must lie in (0, {}]", alpha_max())));
        }
        Ok(Self { values })
    }

    /// `n` log-uniform values from `ratio * alpha_max` to `alpha_max`.
    pub fn geometric(n: usize, ratio: f64) -> Result<Self> {
        let hi = alpha_max();
        let lo = ratio * hi;
        if n == 1 {
            return Self::new(vec![hi]);
        }
        let step = (hi / lo).ln() / (n - 1) as f64;
        let mut values: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
        values[0] = lo;
        values[n - 1] = hi;
        Self::new(values)
    }
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self::geometric(GRID_SIZE, GRID_MIN_RATIO).expect("default grid is valid")
    }
}

/// Keeps the entries of fold `fold` (or every other fold when `complement`),
/// zeroing the remaining off-diagonal entries. The diagonal is kept.
pub fn mask_matrix(m: &Mat, ids: &[Vec<u32>], fold: u32, complement: bool) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let id = ids[i][j];
        let keep = id == 0 || ((id == fold) != complement);
        if keep {
            m[(i, j)]
        } else {
            0.0
        }
    })
}

/// Rank-`k` SVD reconstruction `U_k D_k V_k'`.
pub fn complete_matrix(masked: &Mat, k: usize) -> Result<Mat> {
    linalg::ensure_square(masked, "masked matrix")?;
    let q = masked.nrows();
    if k > q {
        return Err(Error::Config(format!("completion rank {k} exceeds {q}")));
    }
    let svd = linalg::sorted_svd(masked)?;
    let mut out = Mat::zeros(q, q);
    for r in 0..k {
        out += svd.singular_values[r] * svd.u.column(r) * svd.v.column(r).transpose();
    }
    Ok(out)
}

/// Degree-corrected block fit of a completed matrix.
#[derive(Clone, Debug)]
pub struct BlockFit {
    pub theta_y: Vec<f64>,
    pub theta_z: Vec<f64>,
    pub b: Mat,
    pub p: Mat,
    /// Blocks whose denominator was zero (their `B` entry is set to 0).
    pub empty_blocks: Vec<(usize, usize)>,
}

pub fn fit_block_parameters(phi: &Mat, y: &[usize], z: &[usize]) -> Result<BlockFit> {
    linalg::ensure_square(phi, "completed matrix")?;
    let q = phi.nrows();
    if y.len() != q || z.len() != q || y.iter().chain(z).any(|&l| l == 0) {
        return Err(Error::Config(format!("labels must be 1-based vectors of length {q}")));
    }
    let ky = *y.iter().max().unwrap_or(&1);
    let kz = *z.iter().max().unwrap_or(&1);
    let theta_y: Vec<f64> = (0..q).map(|i| phi.row(i).sum()).collect();
    let theta_z: Vec<f64> = (0..q).map(|j| phi.column(j).sum()).collect();
    let mut num = Mat::zeros(ky, kz);
    let mut den = Mat::zeros(ky, kz);
    for i in 0..q {
        for j in 0..q {
            num[(y[i] - 1, z[j] - 1)] += phi[(i, j)];
            den[(y[i] - 1, z[j] - 1)] += theta_y[i] * theta_z[j];
        }
    }
    let mut empty_blocks = Vec::new();
    let b = Mat::from_fn(ky, kz, |k, r| {
        if den[(k, r)] == 0.0 {
            empty_blocks.push((k + 1, r + 1));
            0.0
        } else {
            num[(k, r)] / den[(k, r)]
        }
    });
    if !empty_blocks.is_empty() {
        log::warn!("block fit: zero denominator in blocks {empty_blocks:?}");
    }
    let p = Mat::from_fn(q, q, |i, j| theta_y[i] * theta_z[j] * b[(y[i] - 1, z[j] - 1)]);
    Ok(BlockFit {
        theta_y,
        theta_z,
        b,
        p,
        empty_blocks,
    })
}

/// `H = sum_m (tr Phi_m / q)(1 - tr P_m / q)`.
pub fn selection_criterion(phi: &[Mat], p: &[Mat]) -> Result<f64> {
    if phi.len() != p.len() {
        return Err(Error::Dimension(format!("{} seasonal matrices but {} fitted", phi.len(), p.len())));
    }
    Ok(phi
        .iter()
        .zip(p)
        .map(|(f, pm)| {
            let q = f.nrows() as f64;
            (linalg::trace(f) / q) * (1.0 - linalg::trace(pm) / q)
        })
        .sum())
}

#[derive(Clone, Debug)]
pub struct CvOptions {
    pub folds: usize,
    pub grid: AlphaGrid,
    /// Keep every fold except the current one instead of only the current one.
    pub complement: bool,
    pub kmeans: KMeansOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            grid: AlphaGrid::default(),
            complement: false,
            kmeans: KMeansOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<f64>,
    /// `h[fold][grid index]`.
    pub h: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
    pub selected_alpha: f64,
    pub selected_index: usize,
    pub folds: usize,
    pub mask: String,
    pub dyads_per_season: usize,
}

/// H for one fold and one smoothing value.
fn cell_criterion(
    mats: &[Mat],
    completed: &[Mat],
    ranks: &[SeasonRanks],
    cyclic: bool,
    alpha: f64,
    kmeans: KMeansOptions,
    seed: u64,
) -> Result<f64> {
    let opts = ClusterOptions { alpha, kmeans };
    let out = spectral_cocluster(completed, ranks, cyclic, &opts, &mut rng_from_seed(seed))?;
    let fitted = (0..mats.len())
        .map(|m| {
            let (y, z) = out.path.season_labels(m);
            Ok(fit_block_parameters(&completed[m], y, z)?.p)
        })
        .collect::<Result<Vec<_>>>()?;
    selection_criterion(mats, &fitted)
}

/// Grid value minimising the fold-summed criterion; ties go to the smaller value.
pub fn select_alpha(
    mats: &[Mat],
    ranks: &[SeasonRanks],
    cyclic: bool,
    opts: &CvOptions,
    rng: &mut Rng,
) -> Result<CvReport> {
    let s = mats.len();
    if s == 0 || ranks.len() != s {
        return Err(Error::Config("one rank pair per seasonal matrix is required".into()));
    }
    let q = mats[0].nrows();
    let folds = make_folds(q, s, opts.folds, rng)?;
    let base: u64 = rng.random();
    let completed: Vec<Vec<Mat>> = (1..=opts.folds as u32)
        .map(|fold| {
            mats.iter()
                .zip(ranks)
                .zip(&folds.ids)
                .map(|((m, r), ids)| {
                    let masked = mask_matrix(m, ids, fold, opts.complement);
                    let mut c = complete_matrix(&masked, r.k_y.min(r.k_z))?;
                    c.set_diagonal(&m.diagonal());
                    Ok(c)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n_alpha = opts.grid.values.len();
    let cells: Vec<(usize, usize)> = (0..opts.folds)
        .flat_map(|l| (0..n_alpha).map(move |a| (l, a)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(l, a)| {
            cell_criterion(
                mats,
                &completed[l],
                ranks,
                cyclic,
                opts.grid.values[a],
                opts.kmeans,
                derive_seed2(base, l as u64, a as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<Vec<f64>> = values.chunks(n_alpha).map(<[f64]>::to_vec).collect();
    let totals: Vec<f64> = (0..n_alpha).map(|a| h.iter().map(|row| row[a]).sum()).collect();
    let mut selected_index = 0;
    for (a, &t) in totals.iter().enumerate() {
        if t < totals[selected_index] {
            selected_index = a;
        }
    }
    Ok(CvReport {
        grid: opts.grid.values.clone(),
        h,
        selected_alpha: opts.grid.values[selected_index],
        selected_index,
        totals,
        folds: opts.folds,
        mask: if opts.complement { "complement" } else { "literal" }.into(),
        dyads_per_season: q * (q - 1),
    })
}
