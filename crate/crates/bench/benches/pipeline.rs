use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scbm_bench::{fixture, planted_matrix};
use scbm_core::bench::{run_replication, BenchConfig, ModelKind, Smoothing};
use scbm_core::estimate::estimate_like;
use scbm_core::spectral::{kmeans, pisces_smooth, seasonal_matrices, KMeansOptions};
use scbm_core::transition::companion_radius;
use scbm_core::{rng_from_seed, spectral_cocluster, ClusterOptions, SeasonRanks};

fn estimation(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate");
    for &q in &[24, 60] {
        let f = fixture(ModelKind::Pvar, q, 1000, 1);
        g.bench_with_input(BenchmarkId::new("pvar", q), &f, |b, f| {
            b.iter(|| estimate_like(&f.panel, &f.transitions).unwrap())
        });
    }
    let f = fixture(ModelKind::Vhar, 24, 2000, 2);
    g.bench_function("vhar/24", |b| b.iter(|| estimate_like(&f.panel, &f.transitions).unwrap()));
    g.finish();
}

fn stability(c: &mut Criterion) {
    let mut g = c.benchmark_group("companion_radius");
    g.sample_size(10);
    let p = fixture(ModelKind::Pvar, 24, 100, 3);
    g.bench_function("pvar/24", |b| b.iter(|| companion_radius(&p.transitions).unwrap()));
    let v = fixture(ModelKind::Vhar, 24, 100, 4);
    g.bench_function("vhar/24", |b| b.iter(|| companion_radius(&v.transitions).unwrap()));
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let mut g = c.benchmark_group("cluster");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points = nalgebra::DMatrix::from_fn(120, 4, |_, _| rng.random::<f64>());
    g.bench_function("kmeans/120x4/k4", |b| {
        b.iter(|| kmeans(&points, 4, &mut rng_from_seed(1), &KMeansOptions::default()).unwrap())
    });
    let m = planted_matrix(60, 3);
    let projector = {
        let svd = m.clone().svd(true, false);
        let u = svd.u.unwrap().columns(0, 3).into_owned();
        &u * u.transpose()
    };
    let chain = vec![projector; 4];
    g.bench_function("pisces/60x4", |b| b.iter(|| pisces_smooth(&chain, 0.1, &[3; 4]).unwrap()));
    let mats = vec![m; 4];
    for alpha in [0.0, 0.1] {
        g.bench_with_input(BenchmarkId::new("staggered/60x4", alpha), &alpha, |b, &alpha| {
            let opts = ClusterOptions {
                alpha,
                ..Default::default()
            };
            b.iter(|| spectral_cocluster(&mats, &[SeasonRanks::square(3); 4], true, &opts, &mut rng_from_seed(2)).unwrap())
        });
    }
    let f = fixture(ModelKind::Pvar, 24, 1000, 6);
    let est = estimate_like(&f.panel, &f.transitions).unwrap();
    let seasonal = seasonal_matrices(&est.transitions).unwrap();
    g.bench_function("staggered/estimated_24", |b| {
        b.iter(|| spectral_cocluster(&seasonal, &[SeasonRanks::square(2); 4], true, &ClusterOptions::default(), &mut rng_from_seed(3)).unwrap())
    });
    g.finish();
}

fn replication(c: &mut Criterion) {
    let mut g = c.benchmark_group("replication");
    g.sample_size(10);
    let mut cfg = BenchConfig::new(ModelKind::Pvar, 1, 1, 24, 400);
    cfg.smoothing = Smoothing::None;
    g.bench_function("pvar/24/400/alpha0", |b| b.iter(|| run_replication(&cfg, 0).unwrap()));
    cfg.smoothing = Smoothing::Cv;
    g.bench_function("pvar/24/400/cv", |b| b.iter(|| run_replication(&cfg, 0).unwrap()));
    g.finish();
}

criterion_group!(benches, estimation, stability, clustering, replication);
criterion_main!(benches);
