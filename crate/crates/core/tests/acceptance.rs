//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! The Monte-Carlo reproduction cells (criteria 1 to 4) are reported but do
//! not fail the run. Any other failing criterion exits non-zero.
//!
//! Set `SCBM_DATA_DIR` to a directory holding `payroll.csv` and `rv.csv`
//! to run the empirical pipeline checks; they are skipped otherwise.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng as _;

use scbm_core::analysis::Transform;
use scbm_core::blockmodel::{population_adjacency, sample_propensities_scaled, SeasonGraph};
use scbm_core::crossval::make_folds;
use scbm_core::estimate::{estimate_pvar, estimate_vhar};
use scbm_core::linalg::sorted_svd;
use scbm_core::spectral::{alpha_max, pisces_smooth, project_top_k, top_singular_vectors};
use scbm_core::transition::companion_radius;
use scbm_core::*;

struct Line {
    id: &'static str,
    pass: Option<bool>,
    detail: String,
}

impl Line {
    fn new(id: &'static str, pass: bool, detail: String) -> Self {
        Self { id, pass: Some(pass), detail }
    }

    fn skipped(id: &'static str, detail: String) -> Self {
        Self { id, pass: None, detail }
    }

    fn monte_carlo(&self) -> bool {
        self.id.starts_with(['1', '2', '3', '4'])
    }

    fn print(&self) {
        let tag = match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!("{tag} [{}] {}", self.id, self.detail);
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn bench(model: ModelKind, q: usize, t_len: usize, reps: usize) -> BenchRow {
    let mut cfg = BenchConfig::new(model, 1, 1, q, t_len);
    cfg.replications = reps;
    let start = Instant::now();
    let out = run_benchmark(&cfg).expect("benchmark cell runs");
    let r = &out.row;
    eprintln!(
        "  {} q={q} T={t_len} reps={reps}: acc_cv={:.3} acc_0={:.3} ari_cv={:.3} ari_0={:.3} skipped={} ({:.0}s)",
        model.name(),
        r.acc_cv.unwrap_or(f64::NAN),
        r.acc_0,
        r.ari_cv.unwrap_or(f64::NAN),
        r.ari_0,
        r.skipped,
        start.elapsed().as_secs_f64()
    );
    out.row
}

fn table_cell(id: &'static str, row: &BenchRow, acc: (f64, f64), ari: Option<(f64, f64)>) -> Line {
    let acc_cv = row.acc_cv.unwrap_or(f64::NAN);
    let mut pass = within(acc_cv, acc.0, 0.05) && within(row.acc_0, acc.1, 0.05);
    let mut detail = format!(
        "{} q={} T={}: accuracy cv {acc_cv:.3} (target {:.3}±0.05), alpha=0 {:.3} (target {:.3}±0.05)",
        row.model, row.q, row.t_len, acc.0, row.acc_0, acc.1
    );
    if let Some((cv, zero)) = ari {
        let ari_cv = row.ari_cv.unwrap_or(f64::NAN);
        pass &= within(ari_cv, cv, 0.07) && within(row.ari_0, zero, 0.07);
        detail += &format!(
            "; ARI cv {ari_cv:.3} (target {cv:.3}±0.07), alpha=0 {:.3} (target {zero:.3}±0.07)",
            row.ari_0
        );
    }
    if row.skipped > 0 {
        detail += &format!("; {} replications skipped", row.skipped);
    }
    Line::new(id, pass, detail)
}

/// Non-decreasing with at most one drop, and that drop no larger than 0.01.
fn nearly_increasing(values: &[f64]) -> bool {
    let drops: Vec<f64> = values.windows(2).map(|w| w[0] - w[1]).filter(|&d| d > 0.0).collect();
    drops.is_empty() || (drops.len() == 1 && drops[0] <= 0.01)
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn fmt_series(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ")
}

fn exact_recovery(seed: u64) -> bool {
    let (q, k, s) = (60, 3, 4);
    let mut rng = rng_from_seed(seed);
    let chain: Vec<Vec<usize>> = (0..s)
        .map(|_| {
            let mut labels: Vec<usize> = (0..q).map(|i| i % k + 1).collect();
            for i in (1..q).rev() {
                labels.swap(i, rng.random_range(0..=i));
            }
            labels
        })
        .collect();
    let mut b = Mat::from_element(k, k, 0.1);
    b.fill_diagonal(0.9);
    let seasons: Vec<SeasonGraph> = (0..s)
        .map(|m| {
            let y = chain[m].clone();
            let z = chain[(m + 1) % s].clone();
            let spec = BlockModelSpec {
                q,
                k_y: k,
                k_z: k,
                theta_y: sample_propensities_scaled(&y, PropensityScale::UnitSum, &mut rng).unwrap(),
                theta_z: sample_propensities_scaled(&z, PropensityScale::UnitSum, &mut rng).unwrap(),
                y,
                z,
                b: b.clone(),
                w_lower: 0.3,
                w_upper: 1.0,
                propensity_scale: PropensityScale::UnitSum,
                overflow: Overflow::Reject,
            };
            let adjacency = population_adjacency(&spec, spec.mu()).unwrap();
            SeasonGraph { spec, adjacency }
        })
        .collect();
    let mats: Vec<Mat> = seasons.iter().map(|g| g.adjacency.clone()).collect();
    let truth = CommunityPath::truth(&SeasonalGraphSequence { seasons, cyclic: true });
    let out = spectral_cocluster(&mats, &[SeasonRanks::square(k); 4], true, &ClusterOptions::default(), &mut rng)
        .unwrap();
    let scores = benchmark_scores(&align_labels(&out.path), &truth).unwrap();
    scores.accuracy.iter().all(|&a| a == 1.0) && scores.ari.iter().all(|&a| a == 1.0)
}

fn random_mat(r: usize, c: usize, scale: f64, rng: &mut Rng) -> Mat {
    Mat::from_fn(r, c, |_, _| scale * (rng.random::<f64>() - 0.5))
}

fn property_checks() -> Vec<(&'static str, bool)> {
    let mut rng = rng_from_seed(2024);
    let mut checks = Vec::new();

    let chain: Vec<Mat> = (0..4)
        .map(|_| {
            let a = random_mat(10, 10, 1.0, &mut rng);
            project_top_k(&(&a * a.transpose()), 3).unwrap()
        })
        .collect();
    checks.push(("PisCES alpha=0 identity", pisces_smooth(&chain, 0.0, &[3; 4]).unwrap().smoothed == chain));
    checks.push((
        "projector idempotence and trace",
        chain.iter().all(|p| (p * p - p).norm() < 1e-10 && (p.trace() - 3.0).abs() < 1e-10),
    ));

    let m = random_mat(12, 12, 2.0, &mut rng);
    let blk = top_singular_vectors(&m, 4, 4).unwrap();
    let ortho = [&blk.x_l, &blk.x_r]
        .iter()
        .all(|x| (x.transpose() * *x - Mat::identity(4, 4)).norm() < 1e-8);
    let svd = sorted_svd(&m).unwrap();
    let k = 4;
    let approx = svd.u.columns(0, k) * Mat::from_diagonal(&DVector::from_column_slice(&svd.singular_values[..k]))
        * svd.v.columns(0, k).transpose();
    let tail: f64 = svd.singular_values[k..].iter().map(|s| s * s).sum();
    checks.push(("SVD orthonormality and rank-k reconstruction", ortho && ((&m - approx).norm_squared() - tail).abs() < 1e-8));

    let phi1 = random_mat(2, 2, 1.6, &mut rng);
    let phi2 = random_mat(2, 2, 1.6, &mut rng);
    let noiseless = SimulationOptions {
        burn_in: 0,
        innovations: Innovations::Zero,
        initial: Some(vec![DVector::from_vec(vec![1.0, -0.7])]),
    };
    let t = TransitionSet::pvar(vec![vec![phi1.clone()], vec![phi2.clone()]]);
    let panel = simulate(&t, 12, &noiseless, &mut rng).unwrap();
    let ok = match estimate_pvar(&panel, 2, &[1, 1]).unwrap().transitions {
        TransitionSet::Pvar { seasons, .. } => {
            (&seasons[0][0] - phi1).abs().max() < 1e-8 && (&seasons[1][0] - phi2).abs().max() < 1e-8
        }
        _ => false,
    };
    checks.push(("OLS exact recovery on a noiseless system", ok));

    checks.push(("VHAR estimator equals restricted VAR(22)", vhar_equivalence(&mut rng)));

    let stable = (0..5).all(|r| {
        let cfg = BenchConfig::new(ModelKind::Pvar, 1, 1, 24, 200);
        let mut rng = rng_from_seed(derive_seed(77, r));
        let seq = SeasonalGraphSequence::sample(cfg.specs(&mut rng).unwrap(), true, &mut rng).unwrap();
        let out = stabilize(&seq, &cfg.model.stabilize_options(), &mut rng).unwrap();
        companion_radius(&out.transitions).unwrap() <= 0.95
    });
    checks.push(("stabilized spectral radius at most 0.95", stable));

    checks.push(("ARI of the 4-node example is -0.5", (ari(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap().value + 0.5).abs() < 1e-12));

    let x = [1, 3, 2, 2, 1, 3, 3, 1];
    let relabeled: Vec<usize> = x.iter().map(|&l| [2, 3, 1][l - 1]).collect();
    checks.push(("accuracy invariant to relabeling", permutation_accuracy(&x, &relabeled).unwrap() == 1.0));

    let folds = make_folds(24, 4, 5, &mut rng).unwrap();
    let partition = (0..4).all(|m| {
        let sizes = folds.fold_sizes(m);
        sizes.iter().sum::<usize>() == 24 * 23 && sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1
    });
    checks.push(("folds partition the off-diagonal dyads", partition));

    let grid = AlphaGrid::default().values;
    checks.push((
        "alpha grid endpoints",
        (grid[grid.len() - 1] - 0.130602).abs() < 1e-6
            && (grid[0] - 0.00130602).abs() < 1e-6
            && (alpha_max() - 1.0 / (4.0 * 2f64.sqrt() + 2.0)).abs() < 1e-15,
    ));

    let mut cfg = BenchConfig::new(ModelKind::Pvar, 1, 1, 24, 400);
    cfg.replications = 2;
    let a = serde_json::to_vec(&run_benchmark(&cfg).unwrap().replications).unwrap();
    let b = serde_json::to_vec(&run_benchmark(&cfg).unwrap().replications).unwrap();
    checks.push(("byte-identical reruns under a fixed seed", a == b));
    checks
}

fn vhar_equivalence(rng: &mut Rng) -> bool {
    let q = 3;
    let t = TransitionSet::vhar(Mat::identity(q, q) * 0.3, Mat::identity(q, q) * 0.2, Mat::identity(q, q) * 0.2);
    let panel = simulate(&t, 800, &SimulationOptions::default(), rng).unwrap();
    let TransitionSet::Vhar { daily, weekly, monthly, .. } = estimate_vhar(&panel).unwrap().transitions else {
        return false;
    };
    let data = &panel.data;
    let n = data.nrows() - 22;
    let x_full = Mat::from_fn(n, 22 * q, |r, c| data[(r + 21 - c / q, c % q)]);
    let restrict = Mat::from_fn(22 * q, 3 * q, |row, col| {
        let (h, j) = (row / q, row % q);
        match (col / q, col % q == j) {
            (0, true) if h == 0 => 1.0,
            (1, true) if h < 5 => 0.2,
            (2, true) => 1.0 / 22.0,
            _ => 0.0,
        }
    });
    let xr = &x_full * &restrict;
    let z = data.rows(22, n).into_owned();
    let beta = (xr.transpose() * &xr).lu().solve(&(xr.transpose() * z)).unwrap();
    [daily, weekly, monthly]
        .iter()
        .enumerate()
        .all(|(k, phi)| (phi - beta.rows(k * q, q).transpose()).abs().max() < 1e-8)
}

fn empirical(dir: &PathBuf) -> Vec<Line> {
    let mut lines = Vec::new();
    let payroll = dir.join("payroll.csv");
    if payroll.exists() {
        let cfg = AnalysisConfig {
            transforms: vec![Transform::Aggregate { k: 3, mean: false }, Transform::Log, Transform::Diff],
            model: ModelSpec::Pvar { s: 4, lags: vec![1; 4] },
            ranks: RankPolicy::Scree { threshold: 0.7 },
            smoothing: SmoothingChoice::Alpha(0.0),
            seed: 1,
        };
        let line = match TimeSeriesPanel::load(&payroll, 4).and_then(|p| analyze(&p, &cfg)) {
            Ok(out) => {
                let ranks = out.ranks.season_ranks.unwrap_or_default();
                Line::new(
                    "7a",
                    ranks == [2, 3, 4, 2] && out.ranks.configuration == [2, 3, 3, 4, 4, 4, 4, 2],
                    format!("payroll season ranks {ranks:?}, configuration {:?}", out.ranks.configuration),
                )
            }
            Err(e) => Line::new("7a", false, format!("payroll pipeline failed: {e}")),
        };
        lines.push(line);
    } else {
        lines.push(Line::skipped("7a", format!("payroll check skipped: {} not found", payroll.display())));
    }
    let rv = dir.join("rv.csv");
    if rv.exists() {
        let cfg = AnalysisConfig {
            transforms: vec![],
            model: ModelSpec::Vhar,
            ranks: RankPolicy::Scree { threshold: 0.7 },
            smoothing: SmoothingChoice::Alpha(0.0),
            seed: 1,
        };
        let line = match TimeSeriesPanel::load(&rv, 1).and_then(|p| analyze(&p, &cfg)) {
            Ok(out) => Line::new(
                "7b",
                out.ranks.configuration == [3, 4, 4, 4, 4, 3],
                format!("realized-volatility configuration {:?}", out.ranks.configuration),
            ),
            Err(e) => Line::new("7b", false, format!("realized-volatility pipeline failed: {e}")),
        };
        lines.push(line);
    } else {
        lines.push(Line::skipped("7b", format!("realized-volatility check skipped: {} not found", rv.display())));
    }
    lines
}

fn main() -> ExitCode {
    let mut lines = Vec::new();

    let recovered = (0..20).filter(|&s| exact_recovery(derive_seed(5, s))).count();
    let line5 = Line::new(
        "5",
        recovered == 20,
        format!("exact recovery on population adjacencies (q=60, K=3): {recovered}/20 seeds"),
    );
    line5.print();
    lines.push(line5);

    let checks = property_checks();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let line6 = Line::new(
        "6",
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} property checks hold", checks.len())
        } else {
            format!("failing property checks: {}", failed.join("; "))
        },
    );
    line6.print();
    lines.push(line6);

    eprintln!("running Monte-Carlo cells");
    let trend_t = [200, 400, 1000, 2000, 4000];
    let trend: Vec<BenchRow> = trend_t.iter().map(|&t| bench(ModelKind::Pvar, 24, t, 100)).collect();
    let (low, high) = (&trend[0], &trend[4]);
    lines.push(table_cell("1", high, (0.984, 0.982), Some((0.938, 0.930))));
    lines.push(table_cell("2", low, (0.586, 0.584), None));
    let vhar = bench(ModelKind::Vhar, 24, 8000, 100);
    lines.push(table_cell("3", &vhar, (0.836, 0.831), None));

    let cv_t: Vec<f64> = trend.iter().map(|r| r.acc_cv.unwrap_or(f64::NAN)).collect();
    let zero_t: Vec<f64> = trend.iter().map(|r| r.acc_0).collect();
    lines.push(Line::new(
        "4a",
        nearly_increasing(&cv_t) && nearly_increasing(&zero_t),
        format!(
            "accuracy over T={trend_t:?} (100 replications each): cv [{}], alpha=0 [{}]",
            fmt_series(&cv_t),
            fmt_series(&zero_t)
        ),
    ));
    let wide: Vec<BenchRow> = [60, 120].iter().map(|&q| bench(ModelKind::Pvar, q, 4000, 20)).collect();
    let cv_q = [cv_t[4], wide[0].acc_cv.unwrap_or(f64::NAN), wide[1].acc_cv.unwrap_or(f64::NAN)];
    let zero_q = [zero_t[4], wide[0].acc_0, wide[1].acc_0];
    lines.push(Line::new(
        "4b",
        strictly_decreasing(&cv_q) && strictly_decreasing(&zero_q),
        format!(
            "accuracy over q=[24, 60, 120] at T=4000 (100/20/20 replications): cv [{}], alpha=0 [{}]",
            fmt_series(&cv_q),
            fmt_series(&zero_q)
        ),
    ));

    let dir = std::env::var_os("SCBM_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).unwrap().join("data"));
    lines.extend(empirical(&dir));

    lines.sort_by_key(|l| l.id);
    println!("summary");
    for line in &lines {
        line.print();
    }
    let passed = lines.iter().filter(|l| l.pass == Some(true)).count();
    let decided = lines.iter().filter(|l| l.pass.is_some()).count();
    println!("{passed}/{decided} criteria pass");
    if lines.iter().any(|l| l.pass == Some(false) && !l.monte_carlo()) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
