//! Fixtures shared by the criterion benchmarks.

use scbm_core::bench::{BenchConfig, ModelKind};
use scbm_core::{rng_from_seed, simulate, stabilize, Mat, SeasonalGraphSequence, SimulationOptions, TimeSeriesPanel, TransitionSet};

/// A stabilised simulation problem for one benchmark cell.
pub struct Fixture {
    pub transitions: TransitionSet,
    pub panel: TimeSeriesPanel,
}

pub fn fixture(model: ModelKind, q: usize, t_len: usize, seed: u64) -> Fixture {
    let cfg = BenchConfig::new(model, 1, 1, q, t_len);
    let mut rng = rng_from_seed(seed);
    let specs = cfg.specs(&mut rng).expect("valid specs");
    let seq = SeasonalGraphSequence::sample(specs, model.cyclic(), &mut rng).expect("graphs");
    let stable = stabilize(&seq, &model.stabilize_options(), &mut rng).expect("stable");
    let panel = simulate(&stable.transitions, t_len, &SimulationOptions::default(), &mut rng).expect("panel");
    Fixture {
        transitions: stable.transitions,
        panel,
    }
}

/// Block-diagonal matrix with `k` equal blocks plus a small deterministic perturbation.
pub fn planted_matrix(q: usize, k: usize) -> Mat {
    let size = q / k;
    Mat::from_fn(q, q, |i, j| {
        let base = if i / size == j / size { 0.5 } else { 0.02 };
        base + 1e-3 * (((i * 31 + j * 17) % 23) as f64)
    })
}
