use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::seed::{derive_seed, rng_from_seed, Rng};

pub const DEFAULT_RESTARTS: usize = 20;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    /// 1-based cluster labels.
    pub labels: Vec<usize>,
    /// `K x d` centroids.
    pub centroids: Mat,
    /// Sum of squared distances to the assigned centroid.
    pub objective: f64,
}

struct Points {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Points {
    fn from_rows(m: &Mat) -> Self {
        let (n, d) = m.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(m.row(i).iter());
        }
        Self { n, d, data }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best of `restarts` Lloyd runs from k-means++ seeds.
///
/// Restart `r` draws from its own generator seeded by
/// `derive_seed(base, r)`, where `base` is one draw from `rng`, so restarts
/// can run in parallel without changing the result.
pub fn kmeans(points: &Mat, k: usize, rng: &mut Rng, opts: &KMeansOptions) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot form {k} clusters from {n} points")));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }
    let pts = Points::from_rows(points);
    let base: u64 = rng.random();
    let runs: Vec<(Vec<usize>, Vec<f64>, f64)> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut local = rng_from_seed(derive_seed(base, r as u64));
            lloyd(&pts, k, &mut local, opts.max_iter)
        })
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.2.total_cmp(&b.2).then(ia.cmp(ib)))
        .map(|(_, run)| run)
        .expect("at least one restart");
    let (labels, centroids, objective) = best;
    Ok(KMeansResult {
        labels: labels.into_iter().map(|l| l + 1).collect(),
        centroids: Mat::from_row_slice(k, pts.d, &centroids),
        objective,
    })
}

fn plus_plus(pts: &Points, k: usize, rng: &mut Rng) -> Vec<f64> {
    let (n, d) = (pts.n, pts.d);
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(pts.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| dist2(pts.row(i), pts.row(first))).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = pts.row(pick).to_vec();
        for (i, near) in nearest.iter_mut().enumerate() {
            *near = near.min(dist2(pts.row(i), &c));
        }
        centers.extend(c);
    }
    centers
}

fn assign(pts: &Points, centers: &[f64], k: usize, labels: &mut [usize], dists: &mut [f64]) -> bool {
    let d = pts.d;
    let mut changed = false;
    for i in 0..pts.n {
        let x = pts.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let dc = dist2(x, &centers[c * d..(c + 1) * d]);
            if dc < best_d {
                best_d = dc;
                best = c;
            }
        }
        if labels[i] != best {
            labels[i] = best;
            changed = true;
        }
        dists[i] = best_d;
    }
    changed
}

fn repair_empty(labels: &mut [usize], dists: &mut [f64], k: usize) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    // an empty cluster takes the point farthest from its centroid
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let far = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        let Some(far) = far else { break };
        counts[labels[far]] -= 1;
        labels[far] = empty;
        counts[empty] += 1;
        dists[far] = 0.0;
    }
}

fn update_centers(pts: &Points, labels: &[usize], k: usize, centers: &mut [f64]) {
    let d = pts.d;
    let mut counts = vec![0usize; k];
    centers.iter_mut().for_each(|c| *c = 0.0);
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (t, x) in centers[c * d..(c + 1) * d].iter_mut().zip(pts.row(i)) {
            *t += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            centers[c * d..(c + 1) * d]
                .iter_mut()
                .for_each(|t| *t /= counts[c] as f64);
        }
    }
}

fn lloyd(pts: &Points, k: usize, rng: &mut Rng, max_iter: usize) -> (Vec<usize>, Vec<f64>, f64) {
    let (n, d) = (pts.n, pts.d);
    let mut centers = plus_plus(pts, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    assign(pts, &centers, k, &mut labels, &mut dists);
    for _ in 0..max_iter {
        repair_empty(&mut labels, &mut dists, k);
        update_centers(pts, &labels, k, &mut centers);
        if !assign(pts, &centers, k, &mut labels, &mut dists) {
            break;
        }
    }
    repair_empty(&mut labels, &mut dists, k);
    update_centers(pts, &labels, k, &mut centers);
    let objective = (0..n)
        .map(|i| dist2(pts.row(i), &centers[labels[i] * d..(labels[i] + 1) * d]))
        .sum();
    (labels, centers, objective)
}

/// Sum of squared distances of each point to the mean of its cluster.
pub fn objective_of(points: &Mat, labels: &[usize], k: usize) -> f64 {
    let d = points.ncols();
    let mut sums = Mat::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        let mut row = sums.row_mut(l - 1);
        row += points.row(i);
        counts[l - 1] += 1;
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let c = sums.row(l - 1) / counts[l - 1] as f64;
            (points.row(i) - c).norm_squared()
        })
        .sum()
}
