use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use scbm_core::analysis::{apply_transforms, resolve_ranks};
use scbm_core::bench::{read_rows, write_rows, BenchRow, CSV_HEADER};
use scbm_core::crossval::{select_alpha, AlphaGrid, CvOptions};
use scbm_core::spectral::seasonal_matrices;
use scbm_core::transition::check_stability_assumptions;
use scbm_core::{
    align_labels, analyze, rng_from_seed, run_benchmark, simulate, spectral_cocluster, AnalysisConfig, BenchConfig,
    ClusterOptions, CommunityPath, EstimationResult, ModelKind, Overflow, PropensityScale, RankPolicy,
    SeasonalGraphSequence, SimulationOptions, Smoothing, SmoothingChoice, TimeSeriesPanel, Transform,
    TransitionSet,
};

#[derive(Parser)]
#[command(name = "scbm", version, about = "Spectral co-clustering of networks behind PVAR and VHAR models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel from a random co-blockmodel path
    Simulate(Common),
    /// Run the full pipeline on a CSV panel
    Analyze(Common),
    /// Monte-Carlo benchmark over a grid of cells
    Bench(Common),
    /// Cross-validate the smoothing parameter only
    Cv(Common),
    /// Fit the model and write the estimated transitions
    Estimate(Common),
    /// Cluster previously estimated transitions
    Cluster(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Smoothing parameter, or `cv` to cross-validate it
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Scree threshold for rank selection
    #[arg(long)]
    threshold: Option<f64>,
    /// Aggregate by block means instead of sums
    #[arg(long)]
    agg_mean: bool,
    /// Keep all folds but the held-out one when masking
    #[arg(long)]
    cv_complement: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    model: ModelKind,
    path: u8,
    #[serde(rename = "type")]
    type_id: u8,
    q: usize,
    #[serde(rename = "T")]
    t_len: usize,
    #[serde(default)]
    burn_in: Option<usize>,
    #[serde(default)]
    propensity_scale: Option<PropensityScale>,
    #[serde(default)]
    overflow: Option<Overflow>,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CellSpec {
    model: ModelKind,
    path: u8,
    #[serde(rename = "type")]
    type_id: u8,
    q: usize,
    #[serde(rename = "T")]
    t_len: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    cells: Vec<CellSpec>,
    #[serde(default = "default_replications")]
    replications: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_smoothing")]
    smoothing: Smoothing,
    #[serde(default)]
    folds: Option<usize>,
}

fn default_replications() -> usize {
    100
}

fn default_smoothing() -> Smoothing {
    Smoothing::Cv
}

/// Analysis settings plus the input file.
#[derive(Deserialize)]
struct AnalysisFile {
    input: PathBuf,
    #[serde(flatten)]
    analysis: AnalysisConfig,
}

#[derive(Deserialize)]
struct ClusterFile {
    /// Output of `scbm estimate`.
    estimate: PathBuf,
    #[serde(default)]
    ranks: RankPolicy,
    #[serde(default)]
    smoothing: SmoothingChoice,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct SimulationRecord<'a> {
    transitions: &'a TransitionSet,
    graphs: &'a SeasonalGraphSequence,
    phi: f64,
    spectral_radius: f64,
    resamples: usize,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| anyhow!(scbm_core::Error::Config(format!("{}: {e}", path.display()))))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_matrix_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<u32>]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(u32::to_string))?;
    }
    w.flush()?;
    Ok(())
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(scbm_core::Error::Config(msg.into()))
}

impl Common {
    fn smoothing_override(&self) -> Result<Option<SmoothingChoice>> {
        let folds = self.folds.unwrap_or(scbm_core::crossval::DEFAULT_FOLDS);
        let cv = SmoothingChoice::Cv {
            folds,
            complement: self.cv_complement,
        };
        Ok(match self.alpha.as_deref() {
            None if self.folds.is_some() || self.cv_complement => Some(cv),
            None => None,
            Some("cv") => Some(cv),
            Some(v) => Some(SmoothingChoice::Alpha(
                v.parse()
                    .map_err(|_| config_error(format!("--alpha expects a number or `cv`, got `{v}`")))?,
            )),
        })
    }

    fn apply(&self, cfg: &mut AnalysisConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.threshold {
            cfg.ranks = RankPolicy::Scree { threshold: t };
        }
        if self.agg_mean {
            for t in &mut cfg.transforms {
                if let Transform::Aggregate { mean, .. } = t {
                    *mean = true;
                }
            }
        }
        if let Some(s) = self.smoothing_override()? {
            cfg.smoothing = s;
        }
        Ok(())
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn load_panel(path: &Path, season_count: usize) -> Result<TimeSeriesPanel> {
    Ok(TimeSeriesPanel::load(path, season_count)?)
}

fn cmd_simulate(args: &Common) -> Result<()> {
    let cfg: SimulateConfig = read_json(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let mut bench = BenchConfig::new(cfg.model, cfg.path, cfg.type_id, cfg.q, cfg.t_len);
    if let Some(b) = cfg.burn_in {
        bench.burn_in = b;
    }
    if let Some(s) = cfg.propensity_scale {
        bench.propensity_scale = s;
    }
    if let Some(o) = cfg.overflow {
        bench.overflow = o;
    }
    bench.validate()?;
    let mut rng = rng_from_seed(seed);
    let specs = bench.specs(&mut rng)?;
    let seq = SeasonalGraphSequence::sample(specs, cfg.model.cyclic(), &mut rng)?;
    let stable = scbm_core::stabilize(&seq, &cfg.model.stabilize_options(), &mut rng)?;
    let mut panel = simulate(
        &stable.transitions,
        cfg.t_len,
        &SimulationOptions::with_burn_in(bench.burn_in),
        &mut rng,
    )?;
    panel.season_count = stable.transitions.season_count();
    let out = args.out_dir()?;
    panel.save(&out.join("panel.csv"))?;
    let truth = CommunityPath::truth(&stable.graphs);
    truth.validate()?;
    write_json(out, "truth.json", &truth)?;
    write_json(
        out,
        "model.json",
        &SimulationRecord {
            transitions: &stable.transitions,
            graphs: &stable.graphs,
            phi: stable.phi,
            spectral_radius: stable.rho,
            resamples: stable.resamples,
        },
    )?;
    log::info!(
        "simulated T={} q={} (phi={:.4}, rho={:.4}, {} resamples)",
        cfg.t_len,
        cfg.q,
        stable.phi,
        stable.rho,
        stable.resamples
    );
    Ok(())
}

fn load_analysis(args: &Common) -> Result<(TimeSeriesPanel, AnalysisConfig)> {
    let file: AnalysisFile = read_json(&args.config)?;
    let mut cfg = file.analysis;
    args.apply(&mut cfg)?;
    let panel = load_panel(&file.input, cfg.model.season_count())?;
    Ok((panel, cfg))
}

fn cmd_analyze(args: &Common) -> Result<()> {
    let (panel, cfg) = load_analysis(args)?;
    let result = analyze(&panel, &cfg)?;
    let out = args.out_dir()?;
    write_json(out, "community_path.json", &result.path)?;
    write_json(out, "ranks.json", &result.ranks)?;
    if let Some(cv) = &result.cv {
        write_json(out, "cv_report.json", cv)?;
    }
    write_matrix_csv(out, "co_cluster.csv", &result.variables, &result.co_cluster)?;
    write_matrix_csv(out, "discrepancy.csv", &result.variables, &result.discrepancy)?;
    let order: Vec<&str> = result.order.iter().map(|&i| result.variables[i].as_str()).collect();
    write_json(out, "order.json", &order)?;
    println!(
        "configuration {:?}, alpha {:.6}",
        result.ranks.configuration, result.alpha
    );
    Ok(())
}

fn cell_key(row: &BenchRow) -> (String, u8, u8, usize, usize) {
    (row.model.clone(), row.path, row.type_id, row.q, row.t_len)
}

fn cmd_bench(args: &Common) -> Result<()> {
    let file: BenchFile = read_json(&args.config)?;
    if file.cells.is_empty() {
        return Err(config_error("bench config lists no cells"));
    }
    let seed = args.seed.unwrap_or(file.seed);
    let smoothing = match args.alpha.as_deref() {
        None => file.smoothing,
        Some("cv") => Smoothing::Cv,
        Some("0") | Some("0.0") => Smoothing::None,
        Some(v) => return Err(config_error(format!("bench accepts --alpha cv or 0, got `{v}`"))),
    };
    let out = args.out_dir()?;
    let results = out.join("results.csv");
    let mut rows: Vec<BenchRow> = if results.exists() {
        read_rows(fs::File::open(&results)?)?
    } else {
        Vec::new()
    };
    let total = file.cells.len();
    for (i, cell) in file.cells.iter().enumerate() {
        let mut cfg = BenchConfig::new(cell.model, cell.path, cell.type_id, cell.q, cell.t_len);
        cfg.replications = file.replications;
        cfg.seed = seed;
        cfg.smoothing = smoothing;
        if let Some(f) = args.folds.or(file.folds) {
            cfg.folds = f;
        }
        cfg.validate()?;
        let key = (cfg.model.name().to_string(), cfg.path, cfg.type_id, cfg.q, cfg.t_len);
        if rows.iter().any(|r| cell_key(r) == key) {
            eprintln!("[{}/{total}] {key:?} already done, skipping", i + 1);
            continue;
        }
        eprintln!("[{}/{total}] running {key:?} with {} replications", i + 1, cfg.replications);
        let outcome = run_benchmark(&cfg)?;
        rows.push(outcome.row);
        write_rows(&rows, fs::File::create(&results)?)?;
        let name = format!("replications_{}_p{}_t{}_q{}_T{}.json", key.0, key.1, key.2, key.3, key.4);
        write_json(out, &name, &outcome.replications)?;
    }
    if rows.is_empty() {
        write_rows(&rows, fs::File::create(&results)?)?;
    }
    eprintln!("results in {} ({})", results.display(), CSV_HEADER.join(","));
    Ok(())
}

fn cv_settings(cfg: &AnalysisConfig) -> CvOptions {
    match cfg.smoothing {
        SmoothingChoice::Cv { folds, complement } => CvOptions {
            folds,
            complement,
            grid: AlphaGrid::default(),
            ..Default::default()
        },
        SmoothingChoice::Alpha(_) => CvOptions::default(),
    }
}

fn cmd_cv(args: &Common) -> Result<()> {
    let (panel, cfg) = load_analysis(args)?;
    let panel = apply_transforms(&panel, &cfg.transforms)?;
    let est = cfg.model.estimate(&panel)?;
    let mats = seasonal_matrices(&est.transitions)?;
    let (ranks, _) = resolve_ranks(&mats, &cfg.ranks, cfg.model.cyclic())?;
    let report = select_alpha(
        &mats,
        &ranks,
        cfg.model.cyclic(),
        &cv_settings(&cfg),
        &mut rng_from_seed(scbm_core::derive_seed(cfg.seed, 1)),
    )?;
    write_json(args.out_dir()?, "cv_report.json", &report)?;
    println!("selected alpha {:.6}", report.selected_alpha);
    Ok(())
}

#[derive(Serialize)]
struct EstimateRecord<'a> {
    estimate: &'a EstimationResult,
    stability: Option<scbm_core::transition::StabilityReport>,
    variables: Vec<String>,
}

fn cmd_estimate(args: &Common) -> Result<()> {
    let (panel, cfg) = load_analysis(args)?;
    let panel = apply_transforms(&panel, &cfg.transforms)?;
    let est = cfg.model.estimate(&panel)?;
    let stability = check_stability_assumptions(&est.transitions)
        .map_err(|e| log::warn!("stability check failed: {e}"))
        .ok();
    write_json(
        args.out_dir()?,
        "estimate.json",
        &EstimateRecord {
            estimate: &est,
            stability,
            variables: panel.column_names(),
        },
    )?;
    Ok(())
}

#[derive(Deserialize)]
struct EstimateInput {
    estimate: EstimationResult,
}

fn cmd_cluster(args: &Common) -> Result<()> {
    let mut file: ClusterFile = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        file.seed = seed;
    }
    if let Some(t) = args.threshold {
        file.ranks = RankPolicy::Scree { threshold: t };
    }
    if let Some(s) = args.smoothing_override()? {
        file.smoothing = s;
    }
    let input: EstimateInput = read_json(&file.estimate)?;
    let transitions = input.estimate.transitions;
    let cyclic = !matches!(transitions, TransitionSet::Vhar { .. });
    let mats = seasonal_matrices(&transitions)?;
    let (ranks, report) = resolve_ranks(&mats, &file.ranks, cyclic)?;
    let out = args.out_dir()?;
    let alpha = match file.smoothing {
        SmoothingChoice::Alpha(a) => a,
        SmoothingChoice::Cv { folds, complement } => {
            let opts = CvOptions {
                folds,
                complement,
                ..Default::default()
            };
            let r = select_alpha(&mats, &ranks, cyclic, &opts, &mut rng_from_seed(scbm_core::derive_seed(file.seed, 1)))?;
            write_json(out, "cv_report.json", &r)?;
            r.selected_alpha
        }
    };
    let result = spectral_cocluster(
        &mats,
        &ranks,
        cyclic,
        &ClusterOptions {
            alpha,
            ..Default::default()
        },
        &mut rng_from_seed(scbm_core::derive_seed(file.seed, 2)),
    )?;
    write_json(out, "community_path.json", &align_labels(&result.path))?;
    write_json(out, "ranks.json", &report)?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<scbm_core::Error>() {
        Some(e) if !e.is_config() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Cluster(a) => cmd_cluster(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
