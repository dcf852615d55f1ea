use serde::{Deserialize, Serialize};

use crate::assignment::{max_weight_assignment, pad_square};
use crate::blockmodel::SeasonalGraphSequence;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::seed::Rng;

use super::kmeans::{kmeans, KMeansOptions};
use super::pisces::{extract_basis_from_projector, pisces_smooth, PiscesOutput};
use super::rank::{check_chain, SeasonRanks};
use super::svd::{row_normalize, top_singular_vectors, SingularBlock};

/// Per-season singular blocks together with their processing state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeasonalSingularBasis {
    pub seasons: Vec<SingularBlock>,
    pub smoothed: bool,
    pub normalized: bool,
    /// Per season, the rows of `(X_L, X_R)` that were zero when normalised.
    pub zero_rows: Vec<(Vec<usize>, Vec<usize>)>,
}

impl SeasonalSingularBasis {
    pub fn from_matrices(mats: &[Mat], ranks: &[SeasonRanks]) -> Result<Self> {
        if mats.len() != ranks.len() {
            return Err(Error::Config(format!(
                "{} seasonal matrices but {} rank pairs",
                mats.len(),
                ranks.len()
            )));
        }
        let seasons = mats
            .iter()
            .zip(ranks)
            .map(|(m, r)| top_singular_vectors(m, r.k_y, r.k_z))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            zero_rows: vec![(Vec::new(), Vec::new()); seasons.len()],
            seasons,
            smoothed: false,
            normalized: false,
        })
    }

    pub fn ranks(&self) -> Vec<SeasonRanks> {
        self.seasons
            .iter()
            .map(|b| SeasonRanks {
                k_y: b.x_l.ncols(),
                k_z: b.x_r.ncols(),
            })
            .collect()
    }

    /// PisCES on the left and right projector chains. With `alpha = 0` the
    /// raw vectors are kept.
    pub fn smooth(&self, alpha: f64) -> Result<(Self, Option<[PiscesOutput; 2]>)> {
        if alpha == 0.0 {
            let mut out = self.clone();
            out.smoothed = true;
            return Ok((out, None));
        }
        let ranks = self.ranks();
        let ky: Vec<usize> = ranks.iter().map(|r| r.k_y).collect();
        let kz: Vec<usize> = ranks.iter().map(|r| r.k_z).collect();
        let left: Vec<Mat> = self.seasons.iter().map(|b| &b.x_l * b.x_l.transpose()).collect();
        let right: Vec<Mat> = self.seasons.iter().map(|b| &b.x_r * b.x_r.transpose()).collect();
        let (l, r) = rayon::join(|| pisces_smooth(&left, alpha, &ky), || pisces_smooth(&right, alpha, &kz));
        let (l, r) = (l?, r?);
        let seasons = self
            .seasons
            .iter()
            .enumerate()
            .map(|(m, b)| {
                Ok(SingularBlock {
                    x_l: extract_basis_from_projector(&l.smoothed[m], ky[m])?,
                    x_r: extract_basis_from_projector(&r.smoothed[m], kz[m])?,
                    singular_values: b.singular_values.clone(),
                    rank_deficient: b.rank_deficient,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((
            Self {
                seasons,
                smoothed: true,
                normalized: false,
                zero_rows: self.zero_rows.clone(),
            },
            Some([l, r]),
        ))
    }

    pub fn normalize(&self) -> Self {
        let mut zero_rows = Vec::with_capacity(self.seasons.len());
        let seasons = self
            .seasons
            .iter()
            .map(|b| {
                let (x_l, zl) = row_normalize(&b.x_l);
                let (x_r, zr) = row_normalize(&b.x_r);
                zero_rows.push((zl, zr));
                SingularBlock {
                    x_l,
                    x_r,
                    ..b.clone()
                }
            })
            .collect();
        Self {
            seasons,
            smoothed: self.smoothed,
            normalized: true,
            zero_rows,
        }
    }
}

/// One boundary clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    /// 1-based labels, one per node.
    pub labels: Vec<usize>,
    pub k: usize,
    pub pairing: String,
    /// `permutation[old - 1]` is the label that `old` was renamed to.
    pub permutation: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_rows: Vec<usize>,
}

impl Boundary {
    pub fn new(labels: Vec<usize>, k: usize, pairing: impl Into<String>) -> Self {
        Self {
            labels,
            k,
            pairing: pairing.into(),
            permutation: (1..=k).collect(),
            zero_rows: Vec::new(),
        }
    }
}

/// Boundary clusterings along a seasonal path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityPath {
    pub cyclic: bool,
    pub boundaries: Vec<Boundary>,
}

impl CommunityPath {
    pub fn validate(&self) -> Result<()> {
        let q = self.boundaries.first().map_or(0, |b| b.labels.len());
        for (i, b) in self.boundaries.iter().enumerate() {
            if b.labels.len() != q {
                return Err(Error::Dimension(format!("boundary {} has a different node count", i + 1)));
            }
            if b.labels.iter().any(|&l| l == 0 || l > b.k) {
                return Err(Error::Contract(format!("boundary {} has labels outside 1..={}", i + 1, b.k)));
            }
        }
        Ok(())
    }

    /// Sending and receiving labels of season `m` (0-based).
    pub fn season_labels(&self, m: usize) -> (&[usize], &[usize]) {
        let n = self.boundaries.len();
        let next = if self.cyclic { (m + 1) % n } else { m + 1 };
        (&self.boundaries[m].labels, &self.boundaries[next].labels)
    }

    pub fn season_count(&self) -> usize {
        if self.cyclic {
            self.boundaries.len()
        } else {
            self.boundaries.len().saturating_sub(1)
        }
    }

    /// Ground-truth path of a graph sequence. Cyclic sequences have one
    /// boundary per season carrying its sending labels; transient sequences
    /// have the first sending labels followed by every receiving labelling.
    pub fn truth(seq: &SeasonalGraphSequence) -> Self {
        let specs: Vec<_> = seq.seasons.iter().map(|g| &g.spec).collect();
        let s = specs.len();
        let boundaries = if seq.cyclic {
            (0..s)
                .map(|m| Boundary::new(specs[m].y.clone(), specs[m].k_y, pvar_pairing(m, s)))
                .collect()
        } else {
            std::iter::once(Boundary::new(specs[0].y.clone(), specs[0].k_y, transient_pairing(0, s)))
                .chain((0..s).map(|m| Boundary::new(specs[m].z.clone(), specs[m].k_z, transient_pairing(m + 1, s))))
                .collect()
        };
        Self {
            cyclic: seq.cyclic,
            boundaries,
        }
    }
}

fn pvar_pairing(m: usize, s: usize) -> String {
    let prev = (m + s - 1) % s;
    format!("R{} | L{}", prev + 1, m + 1)
}

fn transient_pairing(b: usize, s: usize) -> String {
    let name = |m: usize| {
        if s == 3 {
            ["d", "w", "m"][m].to_string()
        } else {
            (m + 1).to_string()
        }
    };
    if b == 0 {
        format!("L{}", name(0))
    } else if b == s {
        format!("R{}", name(s - 1))
    } else {
        format!("R{} | L{}", name(b - 1), name(b))
    }
}

fn cluster_boundary(
    features: &Mat,
    k: usize,
    pairing: String,
    rng: &mut Rng,
    opts: &KMeansOptions,
) -> Result<Boundary> {
    let zero_rows: Vec<usize> = (0..features.nrows())
        .filter(|&i| features.row(i).iter().all(|&x| x == 0.0))
        .collect();
    let r = kmeans(features, k, rng, opts)?;
    let mut b = Boundary::new(r.labels, k, pairing);
    b.zero_rows = zero_rows;
    Ok(b)
}

/// Cyclic staggered clustering: boundary `m` clusters `(X_R of season m-1 | X_L of season m)`,
/// with season 1 paired to the last season.
pub fn cocluster_pvar(basis: &SeasonalSingularBasis, rng: &mut Rng, opts: &KMeansOptions) -> Result<CommunityPath> {
    let ranks = basis.ranks();
    check_chain(&ranks, true)?;
    let s = basis.seasons.len();
    let boundaries = (0..s)
        .map(|m| {
            let prev = (m + s - 1) % s;
            let feats = linalg::hstack(&basis.seasons[prev].x_r, &basis.seasons[m].x_l)?;
            cluster_boundary(&feats, ranks[m].k_y, pvar_pairing(m, s), rng, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CommunityPath {
        cyclic: true,
        boundaries,
    })
}

/// Transient staggered clustering: first left block alone, interior pairs,
/// last right block alone.
pub fn cocluster_vhar(basis: &SeasonalSingularBasis, rng: &mut Rng, opts: &KMeansOptions) -> Result<CommunityPath> {
    let ranks = basis.ranks();
    check_chain(&ranks, false)?;
    let s = basis.seasons.len();
    let mut boundaries = Vec::with_capacity(s + 1);
    for b in 0..=s {
        let (feats, k) = if b == 0 {
            (basis.seasons[0].x_l.clone(), ranks[0].k_y)
        } else if b == s {
            (basis.seasons[s - 1].x_r.clone(), ranks[s - 1].k_z)
        } else {
            (
                linalg::hstack(&basis.seasons[b - 1].x_r, &basis.seasons[b].x_l)?,
                ranks[b].k_y,
            )
        };
        boundaries.push(cluster_boundary(&feats, k, transient_pairing(b, s), rng, opts)?);
    }
    Ok(CommunityPath {
        cyclic: false,
        boundaries,
    })
}

/// Renames the labels of each boundary to agree as much as possible with the
/// previous (already aligned) boundary. Partitions are unchanged.
pub fn align_labels(path: &CommunityPath) -> CommunityPath {
    let mut out = path.clone();
    for b in 1..out.boundaries.len() {
        let (prev, cur) = {
            let (a, c) = out.boundaries.split_at_mut(b);
            (&a[b - 1], &mut c[0])
        };
        let k = cur.k;
        let mut agree = vec![vec![0.0; k]; k];
        for (&old, &p) in cur.labels.iter().zip(&prev.labels) {
            if p <= k {
                agree[old - 1][p - 1] += 1.0;
            }
        }
        let perm = max_weight_assignment(&pad_square(&agree, k));
        let rename: Vec<usize> = perm.iter().map(|&j| j + 1).collect();
        for l in cur.labels.iter_mut() {
            *l = rename[*l - 1];
        }
        cur.permutation = cur.permutation.iter().map(|&p| rename[p - 1]).collect();
    }
    out
}

/// Options for the full clustering step.
#[derive(Clone, Copy, Debug)]
pub struct ClusterOptions {
    pub alpha: f64,
    pub kmeans: KMeansOptions,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            kmeans: KMeansOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClusterOutput {
    pub path: CommunityPath,
    pub basis: SeasonalSingularBasis,
    pub pisces: Option<[PiscesOutput; 2]>,
}

/// SVD, optional PisCES, row normalisation and staggered k-means on a list
/// of seasonal matrices. The returned path is not yet aligned.
pub fn spectral_cocluster(
    mats: &[Mat],
    ranks: &[SeasonRanks],
    cyclic: bool,
    opts: &ClusterOptions,
    rng: &mut Rng,
) -> Result<ClusterOutput> {
    check_chain(ranks, cyclic)?;
    let raw = SeasonalSingularBasis::from_matrices(mats, ranks)?;
    let (smoothed, pisces) = raw.smooth(opts.alpha)?;
    let basis = smoothed.normalize();
    let path = if cyclic {
        cocluster_pvar(&basis, rng, &opts.kmeans)?
    } else {
        cocluster_vhar(&basis, rng, &opts.kmeans)?
    };
    Ok(ClusterOutput { path, basis, pisces })
}
