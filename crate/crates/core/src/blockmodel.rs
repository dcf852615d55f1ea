//! Degree-corrected stochastic co-blockmodels for directed weighted graphs.

use rand::Rng as _;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::seed::Rng;

const SUM_TOL: f64 = 1e-10;

/// Normalisation applied to propensities within each community.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityScale {
    /// Propensities sum to one within each community.
    #[default]
    UnitSum,
    /// Propensities sum to the community size (mean one per node).
    CommunitySize,
}

/// What to do with edge probabilities above one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overflow {
    #[default]
    Reject,
    Clip,
}

/// One season's directed degree-corrected co-blockmodel.
///
/// Labels are 1-based. `B` is `K_y x K_z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockModelSpec {
    pub q: usize,
    #[serde(rename = "K_y")]
    pub k_y: usize,
    #[serde(rename = "K_z")]
    pub k_z: usize,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    #[serde(rename = "B", with = "linalg::rows")]
    pub b: Mat,
    pub theta_y: Vec<f64>,
    pub theta_z: Vec<f64>,
    pub w_lower: f64,
    pub w_upper: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub propensity_scale: PropensityScale,
    #[serde(default, skip_serializing_if = "is_default")]
    pub overflow: Overflow,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl BlockModelSpec {
    /// Mean of the uniform weight law.
    pub fn mu(&self) -> f64 {
        0.5 * (self.w_lower + self.w_upper)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.q;
        if q == 0 {
            return Err(Error::InvalidSpec("q must be positive".into()));
        }
        if self.y.len() != q || self.z.len() != q {
            return Err(Error::InvalidSpec(format!(
                "label vectors must have length q={q} (y: {}, z: {})",
                self.y.len(),
                self.z.len()
            )));
        }
        if self.theta_y.len() != q || self.theta_z.len() != q {
            return Err(Error::InvalidSpec(format!(
                "propensity vectors must have length q={q}"
            )));
        }
        if self.b.shape() != (self.k_y, self.k_z) {
            return Err(Error::InvalidSpec(format!(
                "B must be {}x{}, got {}x{}",
                self.k_y,
                self.k_z,
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        if self.b.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidSpec("B entries must lie in [0, 1]".into()));
        }
        if !(self.w_lower > 0.0 && self.w_lower < self.w_upper && self.w_upper.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "weight bounds must satisfy 0 < w_lower < w_upper, got [{}, {}]",
                self.w_lower, self.w_upper
            )));
        }
        check_labels(&self.y, self.k_y, "y")?;
        check_labels(&self.z, self.k_z, "z")?;
        self.check_propensities(&self.theta_y, &self.y, self.k_y, "theta_y")?;
        self.check_propensities(&self.theta_z, &self.z, self.k_z, "theta_z")?;
        if self.overflow == Overflow::Reject {
            for i in 0..q {
                for j in 0..q {
                    let p = self.raw_probability(i, j);
                    if p > 1.0 {
                        return Err(Error::InvalidSpec(format!(
                            "edge probability {p:.4} at ({i}, {j}) exceeds 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_propensities(&self, theta: &[f64], labels: &[usize], k: usize, name: &str) -> Result<()> {
        if theta.iter().any(|&t| !(t.is_finite() && t >= 0.0)) {
            return Err(Error::InvalidSpec(format!("{name} must be finite and nonnegative")));
        }
        let mut sums = vec![0.0; k];
        let mut sizes = vec![0usize; k];
        for (&t, &l) in theta.iter().zip(labels) {
            sums[l - 1] += t;
            sizes[l - 1] += 1;
        }
        for c in 0..k {
            let target = match self.propensity_scale {
                PropensityScale::UnitSum => 1.0,
                PropensityScale::CommunitySize => sizes[c] as f64,
            };
            if (sums[c] - target).abs() > SUM_TOL * target.max(1.0) {
                return Err(Error::InvalidSpec(format!(
                    "{name} sums to {} in community {} (expected {target})",
                    sums[c],
                    c + 1
                )));
            }
        }
        Ok(())
    }

    fn raw_probability(&self, i: usize, j: usize) -> f64 {
        self.theta_y[i] * self.theta_z[j] * self.b[(self.y[i] - 1, self.z[j] - 1)]
    }

    /// Probability that edge `(i, j)` is present.
    pub fn edge_probability(&self, i: usize, j: usize) -> f64 {
        let p = self.raw_probability(i, j);
        match self.overflow {
            Overflow::Reject => p,
            Overflow::Clip => p.min(1.0),
        }
    }
}

fn check_labels(labels: &[usize], k: usize, name: &str) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidSpec(format!("community count for {name} must be positive")));
    }
    let mut used = vec![false; k];
    for &l in labels {
        if l == 0 || l > k {
            return Err(Error::InvalidSpec(format!("{name} label {l} outside 1..={k}")));
        }
        used[l - 1] = true;
    }
    if let Some(c) = used.iter().position(|u| !u) {
        return Err(Error::InvalidSpec(format!("{name} community {} is empty", c + 1)));
    }
    Ok(())
}

/// `mu * Theta_y Y B Z' Theta_z`.
pub fn population_adjacency(spec: &BlockModelSpec, mu: f64) -> Result<Mat> {
    spec.validate()?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidSpec(format!("mu must be positive, got {mu}")));
    }
    Ok(Mat::from_fn(spec.q, spec.q, |i, j| mu * spec.edge_probability(i, j)))
}

/// Draws a weighted adjacency matrix. Entries are visited in row-major order;
/// each draws a Bernoulli indicator and, when present, a uniform weight.
pub fn sample_adjacency(spec: &BlockModelSpec, rng: &mut Rng) -> Result<Mat> {
    spec.validate()?;
    let q = spec.q;
    let mut a = Mat::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            let p = spec.edge_probability(i, j);
            if p > 0.0 && rng.random::<f64>() < p {
                a[(i, j)] = rng.random_range(spec.w_lower..=spec.w_upper);
            }
        }
    }
    Ok(a)
}

/// Contiguous equal-sized communities: `q=6, K=3 -> (1,1,2,2,3,3)`.
pub fn make_equal_memberships(q: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > q {
        return Err(Error::Config(format!("cannot split {q} nodes into {k} communities")));
    }
    if q % k != 0 {
        return Err(Error::Config(format!("{k} communities do not divide q={q}")));
    }
    let size = q / k;
    Ok((0..q).map(|i| i / size + 1).collect())
}

/// Log-normal(2, 1) propensities scaled to sum to one within each community.
pub fn sample_propensities(labels: &[usize], rng: &mut Rng) -> Result<Vec<f64>> {
    sample_propensities_scaled(labels, PropensityScale::UnitSum, rng)
}

pub fn sample_propensities_scaled(
    labels: &[usize],
    scale: PropensityScale,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let k = labels.iter().copied().max().unwrap_or(0);
    check_labels(labels, k.max(1), "labels")?;
    let law = LogNormal::new(2.0, 1.0).expect("valid log-normal parameters");
    let mut theta: Vec<f64> = labels.iter().map(|_| law.sample(rng)).collect();
    let mut sums = vec![0.0; k];
    let mut sizes = vec![0usize; k];
    for (&t, &l) in theta.iter().zip(labels) {
        sums[l - 1] += t;
        sizes[l - 1] += 1;
    }
    for (t, &l) in theta.iter_mut().zip(labels) {
        let target = match scale {
            PropensityScale::UnitSum => 1.0,
            PropensityScale::CommunitySize => sizes[l - 1] as f64,
        };
        *t *= target / sums[l - 1];
    }
    Ok(theta)
}

/// A season's model together with its sampled graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeasonGraph {
    pub spec: BlockModelSpec,
    #[serde(with = "linalg::rows")]
    pub adjacency: Mat,
}

/// Per-season graphs of a PVAR (cyclic) or VHAR (transient) model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeasonalGraphSequence {
    pub seasons: Vec<SeasonGraph>,
    pub cyclic: bool,
}

impl SeasonalGraphSequence {
    /// Samples one graph per spec.
    pub fn sample(specs: Vec<BlockModelSpec>, cyclic: bool, rng: &mut Rng) -> Result<Self> {
        let seasons = specs
            .into_iter()
            .map(|spec| {
                let adjacency = sample_adjacency(&spec, rng)?;
                Ok(SeasonGraph { spec, adjacency })
            })
            .collect::<Result<Vec<_>>>()?;
        let seq = Self { seasons, cyclic };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.seasons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seasons.is_empty()
    }

    pub fn q(&self) -> usize {
        self.seasons.first().map_or(0, |s| s.spec.q)
    }

    /// Redraws every adjacency from its spec.
    pub fn resample(&mut self, rng: &mut Rng) -> Result<()> {
        for season in &mut self.seasons {
            season.adjacency = sample_adjacency(&season.spec, rng)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seasons.is_empty() {
            return Err(Error::InvalidSpec("graph sequence is empty".into()));
        }
        let q = self.q();
        for (m, season) in self.seasons.iter().enumerate() {
            season.spec.validate()?;
            if season.spec.q != q || season.adjacency.shape() != (q, q) {
                return Err(Error::InvalidSpec(format!("season {} has inconsistent size", m + 1)));
            }
        }
        for m in 1..self.seasons.len() {
            if self.seasons[m - 1].spec.z != self.seasons[m].spec.y {
                return Err(Error::InvalidSpec(format!(
                    "receiving labels of season {} differ from sending labels of season {}",
                    m,
                    m + 1
                )));
            }
        }
        if self.cyclic {
            let last = &self.seasons[self.seasons.len() - 1].spec;
            if last.z != self.seasons[0].spec.y {
                return Err(Error::InvalidSpec(
                    "receiving labels of the last season differ from sending labels of the first".into(),
                ));
            }
        }
        Ok(())
    }
}
