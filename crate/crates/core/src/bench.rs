//! Monte-Carlo harness for the simulation grid (paths x types x q x T).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmodel::{
    make_equal_memberships, sample_propensities_scaled, BlockModelSpec, Overflow, PropensityScale,
    SeasonalGraphSequence,
};
use crate::crossval::{select_alpha, CvOptions};
use crate::error::{Error, Result};
use crate::estimate::estimate_like;
use crate::linalg::Mat;
use crate::metrics::benchmark_scores;
use crate::seed::{derive_seed, rng_from_seed, Rng};
use crate::simulate::{simulate, SimulationOptions, DEFAULT_BURN_IN};
use crate::spectral::{seasonal_matrices, spectral_cocluster, ClusterOptions, CommunityPath, SeasonRanks};
use crate::transition::{stabilize, StabilizeOptions};

pub const PVAR_DIAGONALS: [f64; 4] = [0.5, 0.7, 0.6, 0.5];
pub const VHAR_DIAGONALS: [f64; 3] = [0.7, 0.8, 0.9];
pub const WEIGHT_BOUNDS: (f64, f64) = (0.3, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pvar,
    Vhar,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Pvar => "pvar",
            ModelKind::Vhar => "vhar",
        }
    }

    pub fn cyclic(self) -> bool {
        self == ModelKind::Pvar
    }

    pub fn diagonals(self) -> &'static [f64] {
        match self {
            ModelKind::Pvar => &PVAR_DIAGONALS,
            ModelKind::Vhar => &VHAR_DIAGONALS,
        }
    }

    pub fn stabilize_options(self) -> StabilizeOptions {
        match self {
            ModelKind::Pvar => StabilizeOptions::pvar(),
            ModelKind::Vhar => StabilizeOptions::vhar(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    /// Only `alpha = 0`.
    None,
    /// Cross-validated `alpha` and the paired `alpha = 0` run.
    Cv,
}

/// `(K_y1, K_z1, ..., K_ys, K_zs)` of a path.
pub fn path_ranks(model: ModelKind, path: u8) -> Result<Vec<SeasonRanks>> {
    let flat: Vec<usize> = match (model, path) {
        (ModelKind::Pvar, 1) => vec![2; 8],
        (ModelKind::Pvar, 2) => vec![4; 8],
        (ModelKind::Pvar, 3) => vec![2, 3, 3, 3, 3, 3, 3, 2],
        (ModelKind::Pvar, 4) => vec![2, 3, 3, 4, 4, 4, 4, 2],
        (ModelKind::Vhar, 1) => vec![2; 6],
        (ModelKind::Vhar, 2) => vec![4; 6],
        (ModelKind::Vhar, 3) => vec![2, 2, 2, 3, 3, 3],
        (ModelKind::Vhar, 4) => vec![4, 4, 4, 2, 2, 2],
        _ => return Err(Error::Config(format!("path must be 1-4, got {path}"))),
    };
    Ok(flat
        .chunks(2)
        .map(|c| SeasonRanks { k_y: c[0], k_z: c[1] })
        .collect())
}

/// Off-diagonal value of a link-matrix type.
pub fn type_offdiagonal(type_id: u8) -> Result<f64> {
    match type_id {
        1 => Ok(0.01),
        2 => Ok(0.02),
        _ => Err(Error::Config(format!("type must be 1 or 2, got {type_id}"))),
    }
}

/// `K_y x K_z` link matrix: `diag` on the leading square, `off` on the
/// sub- and super-diagonal where defined, zero elsewhere.
pub fn link_matrix(k_y: usize, k_z: usize, diag: f64, off: f64) -> Mat {
    Mat::from_fn(k_y, k_z, |i, j| {
        if i == j {
            diag
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub model: ModelKind,
    pub path: u8,
    #[serde(rename = "type")]
    pub type_id: u8,
    pub q: usize,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub replications: usize,
    pub seed: u64,
    pub smoothing: Smoothing,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_scale")]
    pub propensity_scale: PropensityScale,
    #[serde(default = "default_overflow")]
    pub overflow: Overflow,
}

fn default_folds() -> usize {
    crate::crossval::DEFAULT_FOLDS
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_scale() -> PropensityScale {
    PropensityScale::CommunitySize
}

fn default_overflow() -> Overflow {
    Overflow::Clip
}

impl BenchConfig {
    pub fn new(model: ModelKind, path: u8, type_id: u8, q: usize, t_len: usize) -> Self {
        Self {
            model,
            path,
            type_id,
            q,
            t_len,
            replications: 100,
            seed: 1,
            smoothing: Smoothing::Cv,
            folds: default_folds(),
            burn_in: default_burn_in(),
            propensity_scale: default_scale(),
            overflow: default_overflow(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranks = path_ranks(self.model, self.path)?;
        type_offdiagonal(self.type_id)?;
        for r in &ranks {
            for k in [r.k_y, r.k_z] {
                if self.q % k != 0 {
                    return Err(Error::Config(format!("q={} is not divisible by community count {k}", self.q)));
                }
            }
        }
        if self.t_len == 0 || self.replications == 0 {
            return Err(Error::Config("T and replications must be positive".into()));
        }
        Ok(())
    }

    pub fn ranks(&self) -> Result<Vec<SeasonRanks>> {
        path_ranks(self.model, self.path)
    }

    /// Per-season model specs with freshly drawn propensities.
    pub fn specs(&self, rng: &mut Rng) -> Result<Vec<BlockModelSpec>> {
        let off = type_offdiagonal(self.type_id)?;
        let diag = self.model.diagonals();
        self.ranks()?
            .iter()
            .enumerate()
            .map(|(m, r)| {
                let y = make_equal_memberships(self.q, r.k_y)?;
                let z = make_equal_memberships(self.q, r.k_z)?;
                let theta_y = sample_propensities_scaled(&y, self.propensity_scale, rng)?;
                let theta_z = sample_propensities_scaled(&z, self.propensity_scale, rng)?;
                Ok(BlockModelSpec {
                    q: self.q,
                    k_y: r.k_y,
                    k_z: r.k_z,
                    y,
                    z,
                    b: link_matrix(r.k_y, r.k_z, diag[m], off),
                    theta_y,
                    theta_z,
                    w_lower: WEIGHT_BOUNDS.0,
                    w_upper: WEIGHT_BOUNDS.1,
                    propensity_scale: self.propensity_scale,
                    overflow: self.overflow,
                })
            })
            .collect()
    }
}

/// Outcome of one replication.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub acc_0: f64,
    pub ari_0: f64,
    pub acc_cv: Option<f64>,
    pub ari_cv: Option<f64>,
    pub alpha: Option<f64>,
    pub phi: f64,
    pub resamples: usize,
}

/// One CSV row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub path: u8,
    #[serde(rename = "type")]
    pub type_id: u8,
    pub q: usize,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub acc_cv: Option<f64>,
    pub acc_0: f64,
    pub ari_cv: Option<f64>,
    pub ari_0: f64,
    pub skipped: usize,
}

pub const CSV_HEADER: [&str; 10] = ["model", "path", "type", "q", "T", "acc_cv", "acc_0", "ari_cv", "ari_0", "skipped"];

#[derive(Clone, Debug)]
pub struct BenchOutcome {
    pub row: BenchRow,
    pub replications: Vec<Replication>,
}

/// Simulated data of one replication together with its ground truth.
pub struct ReplicationData {
    pub truth: CommunityPath,
    pub mats: Vec<Mat>,
    pub phi: f64,
    pub resamples: usize,
}

/// Builds graphs, stabilises, simulates and estimates one replication.
pub fn replication_data(cfg: &BenchConfig, rng: &mut Rng) -> Result<ReplicationData> {
    let specs = cfg.specs(rng)?;
    let seq = SeasonalGraphSequence::sample(specs, cfg.model.cyclic(), rng)?;
    let stable = stabilize(&seq, &cfg.model.stabilize_options(), rng)?;
    let panel = simulate(
        &stable.transitions,
        cfg.t_len,
        &SimulationOptions::with_burn_in(cfg.burn_in),
        rng,
    )?;
    let est = estimate_like(&panel, &stable.transitions)?;
    Ok(ReplicationData {
        truth: CommunityPath::truth(&stable.graphs),
        mats: seasonal_matrices(&est.transitions)?,
        phi: stable.phi,
        resamples: stable.resamples,
    })
}

/// Runs replication `index`; seeds derive from `derive_seed(cfg.seed, index)`.
pub fn run_replication(cfg: &BenchConfig, index: usize) -> Result<Replication> {
    let seed = derive_seed(cfg.seed, index as u64);
    let mut rng = rng_from_seed(seed);
    let data = replication_data(cfg, &mut rng)?;
    let ranks = cfg.ranks()?;
    let cyclic = cfg.model.cyclic();
    let score = |alpha: f64, stream: u64| -> Result<(f64, f64)> {
        let opts = ClusterOptions {
            alpha,
            ..Default::default()
        };
        let out = spectral_cocluster(&data.mats, &ranks, cyclic, &opts, &mut rng_from_seed(derive_seed(seed, stream)))?;
        let s = benchmark_scores(&out.path, &data.truth)?;
        Ok((s.mean_accuracy, s.mean_ari))
    };
    let (acc_0, ari_0) = score(0.0, 1)?;
    let (acc_cv, ari_cv, alpha) = match cfg.smoothing {
        Smoothing::None => (None, None, None),
        Smoothing::Cv => {
            let cv = CvOptions {
                folds: cfg.folds,
                ..Default::default()
            };
            let report = select_alpha(&data.mats, &ranks, cyclic, &cv, &mut rng_from_seed(derive_seed(seed, 2)))?;
            let (a, r) = score(report.selected_alpha, 3)?;
            (Some(a), Some(r), Some(report.selected_alpha))
        }
    };
    Ok(Replication {
        index,
        seed,
        acc_0,
        ari_0,
        acc_cv,
        ari_cv,
        alpha,
        phi: data.phi,
        resamples: data.resamples,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Runs all replications in parallel and averages them in index order.
/// Replications whose stabilisation fails are skipped and counted.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let results: Vec<Result<Replication>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, r))
        .collect();
    let mut reps = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rep) => reps.push(rep),
            Err(e @ Error::StabilizationFailed { .. }) => {
                log::warn!("replication {r} skipped: {e}");
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let cv = cfg.smoothing == Smoothing::Cv && !reps.is_empty();
    let row = BenchRow {
        model: cfg.model.name().into(),
        path: cfg.path,
        type_id: cfg.type_id,
        q: cfg.q,
        t_len: cfg.t_len,
        acc_cv: cv.then(|| mean(reps.iter().filter_map(|r| r.acc_cv))),
        acc_0: mean(reps.iter().map(|r| r.acc_0)),
        ari_cv: cv.then(|| mean(reps.iter().filter_map(|r| r.ari_cv))),
        ari_0: mean(reps.iter().map(|r| r.ari_0)),
        skipped,
    };
    Ok(BenchOutcome {
        row,
        replications: reps,
    })
}

pub fn write_rows<W: std::io::Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(CSV_HEADER)?;
    }
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(r: R) -> Result<Vec<BenchRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
