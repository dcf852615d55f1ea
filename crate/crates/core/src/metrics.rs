//! Clustering evaluation: permutation accuracy, adjusted Rand index,
//! co-clustering counts and a hierarchical display order.

use serde::{Deserialize, Serialize};

use crate::assignment::{max_weight_assignment, pad_square};
use crate::error::{Error, Result};
use crate::spectral::CommunityPath;

/// Largest label count for which accuracy enumerates every permutation.
pub const ENUMERATION_LIMIT: usize = 8;

/// Maps arbitrary labels to `0..K` in order of first appearance.
pub fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<usize> = Vec::new();
    let out = labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(i) => i,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect();
    (out, seen.len())
}

fn contingency(a: &[usize], b: &[usize]) -> Result<(Vec<Vec<f64>>, usize, usize)> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("label vectors of length {} and {}", a.len(), b.len())));
    }
    let (a, ka) = relabel(a);
    let (b, kb) = relabel(b);
    let mut table = vec![vec![0.0; kb]; ka];
    for (&i, &j) in a.iter().zip(&b) {
        table[i][j] += 1.0;
    }
    Ok((table, ka, kb))
}

fn for_each_permutation(k: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..k).collect();
    let mut c = vec![0usize; k];
    f(&p);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Fraction of nodes whose estimated label matches the truth under the best
/// renaming of estimated labels.
pub fn permutation_accuracy(truth: &[usize], est: &[usize]) -> Result<f64> {
    let (table, kt, ke) = contingency(est, truth)?;
    let n = truth.len();
    if n == 0 {
        return Ok(1.0);
    }
    let k = kt.max(ke);
    let w = pad_square(&table, k);
    let best = if k <= ENUMERATION_LIMIT {
        let mut best = 0.0f64;
        for_each_permutation(k, |p| {
            let s: f64 = p.iter().enumerate().map(|(i, &j)| w[i][j]).sum();
            best = best.max(s);
        });
        best
    } else {
        max_weight_assignment(&w).iter().enumerate().map(|(i, &j)| w[i][j]).sum()
    };
    Ok(best / n as f64)
}

/// Adjusted Rand index with a flag for the zero-denominator case.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ari {
    pub value: f64,
    pub degenerate: bool,
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

pub fn ari(a: &[usize], b: &[usize]) -> Result<Ari> {
    let (table, _, _) = contingency(a, b)?;
    let n = a.len() as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..table.first().map_or(0, Vec::len))
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let index: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
    let sa: f64 = rows.iter().map(|&x| choose2(x)).sum();
    let sb: f64 = cols.iter().map(|&x| choose2(x)).sum();
    let total = choose2(n);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    let denom = max - expected;
    if denom == 0.0 {
        let identical = relabel(a).0 == relabel(b).0;
        return Ok(Ari {
            value: if identical { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    Ok(Ari {
        value: (index - expected) / denom,
        degenerate: false,
    })
}

/// Per-boundary and mean scores of an estimated path against the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathScores {
    pub accuracy: Vec<f64>,
    pub ari: Vec<f64>,
    pub mean_accuracy: f64,
    pub mean_ari: f64,
}

pub fn benchmark_scores(path: &CommunityPath, truth: &CommunityPath) -> Result<PathScores> {
    if path.boundaries.len() != truth.boundaries.len() || path.cyclic != truth.cyclic {
        return Err(Error::Dimension(format!(
            "estimated path has {} boundaries, truth has {}",
            path.boundaries.len(),
            truth.boundaries.len()
        )));
    }
    let mut accuracy = Vec::new();
    let mut aris = Vec::new();
    for (e, t) in path.boundaries.iter().zip(&truth.boundaries) {
        accuracy.push(permutation_accuracy(&t.labels, &e.labels)?);
        aris.push(ari(&t.labels, &e.labels)?.value);
    }
    let n = accuracy.len().max(1) as f64;
    Ok(PathScores {
        mean_accuracy: accuracy.iter().sum::<f64>() / n,
        mean_ari: aris.iter().sum::<f64>() / n,
        accuracy,
        ari: aris,
    })
}

/// Number of labelings in which each pair of nodes shares a label.
pub fn discrepancy_matrix(boundaries: &[Vec<usize>]) -> Result<Vec<Vec<u32>>> {
    let q = boundaries.first().map_or(0, Vec::len);
    if boundaries.iter().any(|b| b.len() != q) {
        return Err(Error::Dimension("labelings of different lengths".into()));
    }
    let mut d = vec![vec![0u32; q]; q];
    for labels in boundaries {
        for i in 0..q {
            for j in 0..q {
                if labels[i] == labels[j] {
                    d[i][j] += 1;
                }
            }
        }
    }
    Ok(d)
}

/// Leaf order (0-based) of average-linkage clustering on `max(D) - D`.
pub fn hierarchical_order(d: &[Vec<u32>]) -> Vec<usize> {
    let q = d.len();
    let top = d.iter().flatten().copied().max().unwrap_or(0) as f64;
    let dist = |i: usize, j: usize| top - d[i][j] as f64;
    // each cluster keeps its members in leaf order
    let mut clusters: Vec<Vec<usize>> = (0..q).map(|i| vec![i]).collect();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 1);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let sum: f64 = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| dist(i, j))
                    .sum();
                let avg = sum / (clusters[a].len() * clusters[b].len()) as f64;
                if avg < best.0 {
                    best = (avg, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
    }
    clusters.pop().unwrap_or_default()
}
