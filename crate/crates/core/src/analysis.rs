//! End-to-end analysis of an observed panel: transforms, estimation, rank
//! selection, smoothing, staggered clustering and reporting.

use serde::{Deserialize, Serialize};

use crate::crossval::{select_alpha, AlphaGrid, CvOptions, CvReport};
use crate::error::{Error, Result};
use crate::estimate::{estimate_pvar, estimate_var, estimate_vhar, EstimationResult};
use crate::linalg::Mat;
use crate::metrics::{discrepancy_matrix, hierarchical_order};
use crate::seed::{derive_seed, rng_from_seed};
use crate::simulate::TimeSeriesPanel;
use crate::spectral::rank::{check_chain, flatten};
use crate::spectral::{
    align_labels, seasonal_matrices, select_rank, spectral_cocluster, staggered_ranks, ClusterOptions,
    CommunityPath, SeasonRanks,
};
use crate::transition::VHAR_LAGS;

pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// One step of the preprocessing chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Transform {
    /// Non-overlapping sums (or means) of `k` consecutive rows; an incomplete
    /// final block is dropped.
    Aggregate {
        k: usize,
        #[serde(default)]
        mean: bool,
    },
    Log,
    Diff,
    Center,
}

pub fn apply_transform(data: &Mat, t: &Transform, names: &[String]) -> Result<Mat> {
    let (n, q) = data.shape();
    match *t {
        Transform::Aggregate { k, mean } => {
            if k == 0 {
                return Err(Error::Config("aggregation width must be positive".into()));
            }
            let blocks = n / k;
            if n % k != 0 {
                log::warn!("dropping {} trailing rows that do not fill an aggregation block", n % k);
            }
            let scale = if mean { 1.0 / k as f64 } else { 1.0 };
            Ok(Mat::from_fn(blocks, q, |b, j| {
                data.view((b * k, j), (k, 1)).sum() * scale
            }))
        }
        Transform::Log => {
            if let Some((i, j)) = (0..n)
                .flat_map(|i| (0..q).map(move |j| (i, j)))
                .find(|&(i, j)| data[(i, j)] <= 0.0)
            {
                return Err(Error::Config(format!(
                    "log of non-positive value {} in column '{}' at row {}",
                    data[(i, j)],
                    names[j],
                    i + 1
                )));
            }
            Ok(data.map(f64::ln))
        }
        Transform::Diff => {
            if n < 2 {
                return Err(Error::Config("differencing needs at least two rows".into()));
            }
            Ok(data.rows(1, n - 1) - data.rows(0, n - 1))
        }
        Transform::Center => {
            let mut out = data.clone();
            for j in 0..q {
                let m = data.column(j).mean();
                out.column_mut(j).add_scalar_mut(-m);
            }
            Ok(out)
        }
    }
}

/// Applies `chain` in order. The first remaining row is season 1.
pub fn apply_transforms(panel: &TimeSeriesPanel, chain: &[Transform]) -> Result<TimeSeriesPanel> {
    let names = panel.column_names();
    let mut data = panel.data.clone();
    for t in chain {
        data = apply_transform(&data, t, &names)?;
        if data.nrows() == 0 {
            return Err(Error::Config(format!("no rows left after {t:?}")));
        }
    }
    let mut out = TimeSeriesPanel::new(data, panel.season_count)?;
    out.labels = panel.labels.clone();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Var { p: usize },
    Pvar { s: usize, lags: Vec<usize> },
    Vhar,
}

impl ModelSpec {
    pub fn season_count(&self) -> usize {
        match self {
            ModelSpec::Var { .. } | ModelSpec::Vhar => 1,
            ModelSpec::Pvar { s, .. } => *s,
        }
    }

    /// Whether the community path closes on itself.
    pub fn cyclic(&self) -> bool {
        !matches!(self, ModelSpec::Vhar)
    }

    fn min_rows(&self) -> usize {
        match self {
            ModelSpec::Var { p } => p + 1,
            ModelSpec::Pvar { s, lags } => lags.iter().max().copied().unwrap_or(1) + s,
            ModelSpec::Vhar => VHAR_LAGS + 1,
        }
    }

    pub fn estimate(&self, panel: &TimeSeriesPanel) -> Result<EstimationResult> {
        match self {
            ModelSpec::Var { p } => estimate_var(panel, *p),
            ModelSpec::Pvar { s, lags } => estimate_pvar(panel, *s, lags),
            ModelSpec::Vhar => estimate_vhar(panel),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankPolicy {
    /// Flattened `(K_y1, K_z1, K_y2, K_z2, ...)`.
    Explicit(Vec<usize>),
    Scree { threshold: f64 },
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::Scree {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothingChoice {
    Alpha(f64),
    Cv {
        folds: usize,
        #[serde(default)]
        complement: bool,
    },
}

impl Default for SmoothingChoice {
    fn default() -> Self {
        SmoothingChoice::Cv {
            folds: crate::crossval::DEFAULT_FOLDS,
            complement: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub transforms: Vec<Transform>,
    pub model: ModelSpec,
    #[serde(default)]
    pub ranks: RankPolicy,
    #[serde(default)]
    pub smoothing: SmoothingChoice,
    #[serde(default)]
    pub seed: u64,
}

/// Scree ranks and the resolved staggered configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReport {
    pub singular_values: Vec<Vec<f64>>,
    /// Per-season scree ranks, absent for explicit configurations.
    pub season_ranks: Option<Vec<usize>>,
    pub threshold: Option<f64>,
    /// Flattened `(K_y1, K_z1, ...)`.
    pub configuration: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub path: CommunityPath,
    pub ranks: RankReport,
    pub alpha: f64,
    pub cv: Option<CvReport>,
    /// Same-community counts across boundaries.
    pub co_cluster: Vec<Vec<u32>>,
    /// `boundaries - co_cluster`.
    pub discrepancy: Vec<Vec<u32>>,
    /// 0-based display order from hierarchical clustering.
    pub order: Vec<usize>,
    pub variables: Vec<String>,
}

/// Resolves the per-season `(K_y, K_z)` from a policy and the seasonal matrices.
pub fn resolve_ranks(mats: &[Mat], policy: &RankPolicy, cyclic: bool) -> Result<(Vec<SeasonRanks>, RankReport)> {
    let singular_values: Vec<Vec<f64>> = mats
        .iter()
        .map(|m| crate::linalg::sorted_svd(m).map(|s| s.singular_values))
        .collect::<Result<_>>()?;
    let (ranks, season_ranks, threshold) = match policy {
        RankPolicy::Explicit(flat) => {
            if flat.len() != 2 * mats.len() {
                return Err(Error::Config(format!(
                    "explicit configuration needs {} counts, got {}",
                    2 * mats.len(),
                    flat.len()
                )));
            }
            let ranks: Vec<SeasonRanks> = flat
                .chunks(2)
                .map(|c| SeasonRanks { k_y: c[0], k_z: c[1] })
                .collect();
            check_chain(&ranks, cyclic)?;
            (ranks, None, None)
        }
        RankPolicy::Scree { threshold } => {
            let per: Vec<usize> = singular_values
                .iter()
                .map(|sv| select_rank(sv, *threshold))
                .collect::<Result<_>>()?;
            (staggered_ranks(&per, cyclic)?, Some(per), Some(*threshold))
        }
    };
    Ok((
        ranks.clone(),
        RankReport {
            singular_values,
            season_ranks,
            threshold,
            configuration: flatten(&ranks),
        },
    ))
}

fn check_columns(panel: &TimeSeriesPanel) -> Result<()> {
    let names = panel.column_names();
    for j in 0..panel.q() {
        let col = panel.data.column(j);
        if col.iter().all(|&x| x == col[0]) {
            return Err(Error::SingularDesign {
                regression: format!("column '{}' is constant", names[j]),
                condition: f64::INFINITY,
            });
        }
    }
    Ok(())
}

/// Runs the full pipeline on a raw panel.
pub fn analyze(raw: &TimeSeriesPanel, cfg: &AnalysisConfig) -> Result<AnalysisOutput> {
    let mut raw = raw.clone();
    raw.season_count = cfg.model.season_count();
    let panel = apply_transforms(&raw, &cfg.transforms)?;
    if panel.t_len() < cfg.model.min_rows() {
        return Err(Error::Config(format!(
            "only {} rows remain after transforms; the model needs at least {}",
            panel.t_len(),
            cfg.model.min_rows()
        )));
    }
    check_columns(&panel)?;
    let est = cfg.model.estimate(&panel)?;
    let mats = seasonal_matrices(&est.transitions)?;
    let cyclic = cfg.model.cyclic();
    let (ranks, report) = resolve_ranks(&mats, &cfg.ranks, cyclic)?;
    let (alpha, cv) = match cfg.smoothing {
        SmoothingChoice::Alpha(a) => (a, None),
        SmoothingChoice::Cv { folds, complement } => {
            let opts = CvOptions {
                folds,
                grid: AlphaGrid::default(),
                complement,
                ..Default::default()
            };
            let r = select_alpha(&mats, &ranks, cyclic, &opts, &mut rng_from_seed(derive_seed(cfg.seed, 1)))?;
            (r.selected_alpha, Some(r))
        }
    };
    let out = spectral_cocluster(
        &mats,
        &ranks,
        cyclic,
        &ClusterOptions {
            alpha,
            ..Default::default()
        },
        &mut rng_from_seed(derive_seed(cfg.seed, 2)),
    )?;
    let path = align_labels(&out.path);
    let labels: Vec<Vec<usize>> = path.boundaries.iter().map(|b| b.labels.clone()).collect();
    let co_cluster = discrepancy_matrix(&labels)?;
    let total = labels.len() as u32;
    let discrepancy = co_cluster
        .iter()
        .map(|row| row.iter().map(|&c| total - c).collect())
        .collect();
    let order = hierarchical_order(&co_cluster);
    Ok(AnalysisOutput {
        path,
        ranks: report,
        alpha,
        cv,
        co_cluster,
        discrepancy,
        order,
        variables: panel.column_names(),
    })
}
