use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sending and receiving community counts of one season.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonRanks {
    pub k_y: usize,
    pub k_z: usize,
}

impl SeasonRanks {
    pub fn square(k: usize) -> Self {
        Self { k_y: k, k_z: k }
    }
}

/// Smallest `K` whose leading singular values carry `threshold` of the total.
pub fn select_rank(values: &[f64], threshold: f64) -> Result<usize> {
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Config("singular values must be finite and nonnegative".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("threshold {threshold} outside (0, 1]")));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numerical("all singular values are zero".into()));
    }
    let mut cum = 0.0;
    for (k, v) in values.iter().enumerate() {
        cum += v;
        if cum / total >= threshold - 1e-12 {
            return Ok(k + 1);
        }
    }
    Ok(values.len())
}

/// Per-season counts from per-season scree ranks.
///
/// Each boundary between two seasons gets the larger of their ranks, so that
/// the receiving count of season `m-1` equals the sending count of season
/// `m`. Cyclic paths also join the last season to the first; transient paths
/// keep the first sending and last receiving ranks as they are.
pub fn staggered_ranks(ranks: &[usize], cyclic: bool) -> Result<Vec<SeasonRanks>> {
    let s = ranks.len();
    if s == 0 || ranks.contains(&0) {
        return Err(Error::Config("ranks must be positive and non-empty".into()));
    }
    let boundary: Vec<usize> = if cyclic {
        (0..s).map(|m| ranks[(m + s - 1) % s].max(ranks[m])).collect()
    } else {
        (0..=s)
            .map(|m| match m {
                0 => ranks[0],
                m if m == s => ranks[s - 1],
                m => ranks[m - 1].max(ranks[m]),
            })
            .collect()
    };
    Ok((0..s)
        .map(|m| SeasonRanks {
            k_y: boundary[m],
            k_z: boundary[if cyclic { (m + 1) % s } else { m + 1 }],
        })
        .collect())
}

/// Flattens to `(K_y1, K_z1, K_y2, K_z2, ...)`.
pub fn flatten(ranks: &[SeasonRanks]) -> Vec<usize> {
    ranks.iter().flat_map(|r| [r.k_y, r.k_z]).collect()
}

/// Checks `K_z(m-1) = K_y(m)`, including the wrap for cyclic paths.
pub fn check_chain(ranks: &[SeasonRanks], cyclic: bool) -> Result<()> {
    let s = ranks.len();
    if s == 0 {
        return Err(Error::Config("no seasons".into()));
    }
    for m in 1..s {
        if ranks[m - 1].k_z != ranks[m].k_y {
            return Err(Error::Config(format!(
                "receiving count of season {m} ({}) differs from sending count of season {} ({})",
                ranks[m - 1].k_z,
                m + 1,
                ranks[m].k_y
            )));
        }
    }
    if cyclic && ranks[s - 1].k_z != ranks[0].k_y {
        return Err(Error::Config(format!(
            "receiving count of the last season ({}) differs from sending count of the first ({})",
            ranks[s - 1].k_z, ranks[0].k_y
        )));
    }
    Ok(())
}
