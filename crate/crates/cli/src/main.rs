use std::path::{Path, PathBuf};
use std::process;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use latent_finsler::data::{gen_circles_sphere, gen_pinwheel_sphere, load_csv, Dataset};
use latent_finsler::experiments::{
    bound_sweep_with, bounded_ensemble, check_convergence, dyadic_dims, geodesic_comparison, truncation_sweep,
    write_comparison_csv, write_convergence_csv, BoundSweepConfig, ComparisonOptions, RunMetadata,
};
use latent_finsler::geodesic::{GradientMode, MinimizeOptions};
use latent_finsler::gp::{fit, pca_latents, FitOptions, GpModel, Kernel, KernelFamily};
use latent_finsler::io::write_sidecar;
use latent_finsler::measure::{indicatrix, volume_field, Indicatrix};
use latent_finsler::randmat::rng_from_seed;
use latent_finsler::{LatentMap, MetricKind, SphereMap};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

/// Finsler and Riemannian geometry of Gaussian-process latent spaces.
#[derive(Debug, Parser)]
#[command(name = "latent-finsler", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset on the unit sphere.
    Generate(GenerateArgs),
    /// Fit a GP latent variable model to a dataset.
    Fit(FitArgs),
    /// Compute geodesics under several metrics and compare them.
    Geodesic(GeodesicArgs),
    /// Run the inequality and convergence sweeps.
    Verify(VerifyArgs),
    /// Volume densities over the latent box of a 2-D model.
    Volume(VolumeArgs),
    /// Indicatrices at one latent point of a 2-D model.
    Indicatrix(IndicatrixArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DatasetKind {
    Pinwheel,
    Circles,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: DatasetKind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Number of pinwheel arms.
    #[arg(long, default_value_t = 5)]
    arms: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Circle radii in the plane before projection.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,2.0")]
    radii: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum LatentInit {
    Pca,
    Random,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// The last column of the data file holds integer labels.
    #[arg(long)]
    labels: bool,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value = "rbf")]
    kernel: String,
    #[arg(long, default_value_t = 1.0)]
    lengthscale: f64,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long)]
    optimize_latents: bool,
    #[arg(long, value_enum, default_value_t = LatentInit::Pca)]
    init: LatentInit,
    /// Seed for the random latent initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MetricChoice {
    Riemann,
    Finsler,
    Euclid,
    AlphaSigma,
    All,
}

impl MetricChoice {
    fn kinds(self, all: &[MetricKind]) -> Vec<MetricKind> {
        match self {
            MetricChoice::Riemann => vec![MetricKind::Riemannian],
            MetricChoice::Finsler => vec![MetricKind::Finsler],
            MetricChoice::Euclid => vec![MetricKind::Euclidean],
            MetricChoice::AlphaSigma => vec![MetricKind::AlphaSigma],
            MetricChoice::All => all.to_vec(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct GeodesicArgs {
    /// Model file written by `fit`.
    #[arg(long, conflicts_with = "sphere", required_unless_present = "sphere")]
    model: Option<PathBuf>,
    /// Use the unit sphere in (θ, φ) coordinates instead of a model.
    #[arg(long)]
    sphere: bool,
    /// Start points, comma separated coordinates; repeat for several pairs.
    #[arg(long = "from", value_parser = parse_point, allow_hyphen_values = true)]
    from: Vec<Vec<f64>>,
    /// End points matching each `--from`.
    #[arg(long = "to", value_parser = parse_point, allow_hyphen_values = true)]
    to: Vec<Vec<f64>>,
    /// Additional endpoint pairs drawn at random inside the latent box.
    #[arg(long, default_value_t = 0)]
    random_pairs: usize,
    #[arg(long, value_enum, default_value_t = MetricChoice::All)]
    metric: MetricChoice,
    /// Points per discrete curve.
    #[arg(long, default_value_t = latent_finsler::geodesic::DEFAULT_CURVE_POINTS)]
    nc: usize,
    /// Grid nodes per side for the graph initialization.
    #[arg(long, default_value_t = latent_finsler::geodesic::DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = latent_finsler::geodesic::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    /// Random metric points in the bound sweep.
    #[arg(long, default_value_t = 10_000)]
    specs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dimensions of the truncation sweep: `lo:hi:dyadic` or a comma list.
    #[arg(long, default_value = "2:1024:dyadic")]
    dims: String,
    /// Specs in the truncation ensemble.
    #[arg(long, default_value_t = 12)]
    ensemble: usize,
    /// Random directions per ensemble spec.
    #[arg(long, default_value_t = 64)]
    v_samples: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Corrupt one value so the sweep must fail.
    #[arg(long, hide = true)]
    inject_violation: bool,
}

#[derive(Debug, Args, Serialize)]
struct VolumeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = latent_finsler::measure::DEFAULT_VOLUME_GRID)]
    grid: usize,
    #[arg(long, default_value_t = latent_finsler::measure::DEFAULT_VOLUME_ANGLES)]
    angles: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct IndicatrixArgs {
    #[arg(long)]
    model: PathBuf,
    /// Latent point; defaults to the training point with the lowest
    /// posterior variance.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    at: Option<Vec<f64>>,
    #[arg(long, default_value_t = latent_finsler::measure::DEFAULT_INDICATRIX_ANGLES)]
    angles: usize,
    #[arg(long, value_enum, default_value_t = MetricChoice::All)]
    metric: MetricChoice,
    /// Output CSV; with several metrics the metric name is appended to the
    /// file stem.
    #[arg(long)]
    out: PathBuf,
}

fn parse_point(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("'{c}': {e}")))
        .collect()
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let dims = if let Some(range) = s.strip_suffix(":dyadic") {
        let (lo, hi) = range.split_once(':').context("expected lo:hi:dyadic")?;
        dyadic_dims(lo.trim().parse()?, hi.trim().parse()?)
    } else {
        s.split(',').map(|c| c.trim().parse::<usize>()).collect::<std::result::Result<_, _>>()?
    };
    if dims.is_empty() || dims.contains(&0) {
        bail!("dimension list '{s}' is empty or contains 0");
    }
    Ok(dims)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run_generate(args: &GenerateArgs) -> Result<i32> {
    let data: Dataset = match args.kind {
        DatasetKind::Pinwheel => gen_pinwheel_sphere(args.n, args.arms, args.noise, args.seed)?,
        DatasetKind::Circles => gen_circles_sphere(args.n, &args.radii, args.noise, args.seed)?,
    };
    data.write_csv(&args.out)?;
    write_sidecar(&args.out, &RunMetadata::new("generate", args.seed, args))?;
    log::info!("wrote {} points to {}", data.n(), args.out.display());
    Ok(0)
}

fn run_fit(args: &FitArgs) -> Result<i32> {
    let data = load_csv(&args.data, args.labels)?;
    let family: KernelFamily = args.kernel.parse()?;
    let kernel = Kernel::new(family, args.lengthscale, args.variance)?;
    let x = match args.init {
        LatentInit::Pca => pca_latents(&data.points, args.q)?,
        LatentInit::Random => {
            let mut rng = rng_from_seed(args.seed);
            DMatrix::from_fn(data.n(), args.q, |_, _| rng.random_range(-1.0..1.0))
        }
    };
    let opts = FitOptions {
        steps: args.steps,
        learning_rate: args.lr,
        optimize_latents: args.optimize_latents,
    };
    let report = fit(&x, &data.points, kernel, args.noise, &opts)?;
    let model = &report.model;
    model.save(&args.out)?;
    write_sidecar(&args.out, &RunMetadata::new("fit", args.seed, args))?;
    let k = model.kernel();
    println!("kernel      {}", args.kernel);
    println!("lengthscale {}", k.lengthscale);
    println!("variance    {}", k.variance);
    println!("noise       {}", model.noise());
    println!("best step   {}", report.best_step);
    println!("log marginal likelihood {}", model.log_marginal_likelihood());
    Ok(0)
}

fn endpoint_pairs<M: LatentMap>(map: &M, args: &GeodesicArgs, box_: (DVector<f64>, DVector<f64>)) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    if args.from.len() != args.to.len() {
        bail!("{} --from points but {} --to points", args.from.len(), args.to.len());
    }
    let q = map.dim_latent();
    let mut pairs = Vec::new();
    for (a, b) in args.from.iter().zip(&args.to) {
        if a.len() != q || b.len() != q {
            bail!("endpoints must have {q} coordinates");
        }
        pairs.push((DVector::from_column_slice(a), DVector::from_column_slice(b)));
    }
    let (lo, hi) = box_;
    let mut rng = rng_from_seed(args.seed);
    let mut draw = || DVector::from_fn(q, |i, _| rng.random_range(lo[i]..=hi[i]));
    for _ in 0..args.random_pairs {
        let a = draw();
        let b = draw();
        pairs.push((a, b));
    }
    if pairs.is_empty() {
        bail!("no endpoint pairs: pass --from/--to or --random-pairs");
    }
    Ok(pairs)
}

fn run_geodesic(args: &GeodesicArgs) -> Result<i32> {
    ensure_dir(&args.out)?;
    let minimize = MinimizeOptions {
        max_iter: args.max_iter,
        tol: args.tol,
        mode: GradientMode::Hybrid,
        ..MinimizeOptions::default()
    };
    let defaults = ComparisonOptions::default();
    let opts = ComparisonOptions {
        grid: args.grid,
        n_points: args.nc,
        minimize,
        kinds: args.metric.kinds(&defaults.kinds),
    };
    let rows = if args.sphere {
        let map = SphereMap::new();
        let margin = 0.3;
        let bounds = (
            DVector::from_vec(vec![0.0, margin]),
            DVector::from_vec(vec![2.0 * std::f64::consts::PI, std::f64::consts::PI - margin]),
        );
        let pairs = endpoint_pairs(&map, args, bounds)?;
        let rows = geodesic_comparison(&map, &pairs, &opts, Some(&args.out))?;
        for (i, (a, b)) in pairs.iter().enumerate() {
            println!("pair {i}: great-circle distance {}", map.great_circle_distance(a, b));
        }
        rows
    } else {
        let path = args.model.as_ref().context("--model is required without --sphere")?;
        let map = GpModel::load(path)?;
        let bounds = map.latent_bounding_box(0.1);
        let pairs = endpoint_pairs(&map, args, bounds)?;
        geodesic_comparison(&map, &pairs, &opts, Some(&args.out))?
    };
    let table = args.out.join("comparison.csv");
    write_comparison_csv(&rows, &table)?;
    write_sidecar(&table, &RunMetadata::new("geodesic", args.seed, args))?;
    for r in &rows {
        let s = &r.summary;
        println!(
            "pair {} {:<11} L_R {:.6} L_F {:.6} E {:.6} iterations {}{}",
            r.pair,
            s.metric,
            s.length_riemann,
            s.length_finsler,
            s.energy,
            s.iterations,
            if s.converged { "" } else { " (not converged)" }
        );
    }
    Ok(0)
}

fn run_verify(args: &VerifyArgs) -> Result<i32> {
    ensure_dir(&args.out)?;
    let dims = parse_dims(&args.dims)?;
    let meta = RunMetadata::new("verify", args.seed, args);

    let mut cfg = BoundSweepConfig::new(args.specs, args.seed);
    cfg.inject_violation = args.inject_violation;
    let report = bound_sweep_with(&cfg)?;
    let bounds_csv = args.out.join("bounds.csv");
    report.write_csv(&bounds_csv)?;
    write_sidecar(&bounds_csv, &meta)?;

    let d_max = *dims.iter().max().expect("non-empty dims");
    let ensemble = bounded_ensemble(args.ensemble, d_max, 2, args.seed);
    let rows = truncation_sweep(&ensemble, &dims, args.v_samples, args.seed)?;
    let conv_csv = args.out.join("convergence.csv");
    write_convergence_csv(&rows, &conv_csv)?;
    write_sidecar(&conv_csv, &meta)?;
    let check = check_convergence(&rows, 8);

    println!("bound sweep: {} specs, {} violations", report.n_specs, report.total_violations());
    println!("largest gap / bound: {:.6}", report.max_gap_over_bound);
    println!(
        "truncation sweep: gap within bound {}, D*gap <= 1+M {}, D*gap non-increasing from D=8 {}",
        check.gap_within_bound, check.scaled_gap_bounded, check.scaled_gap_nonincreasing
    );
    if let Some(d) = check.first_increase_at {
        log::warn!("D*gap first increases at D={d}");
    }
    let failed = report.total_violations() > 0 || !check.gap_within_bound || !check.scaled_gap_bounded;
    Ok(if failed { 1 } else { 0 })
}

fn run_volume(args: &VolumeArgs) -> Result<i32> {
    let model = GpModel::load(&args.model)?;
    let field = volume_field(&model, args.grid, args.angles, None)?;
    field.write_csv(&args.out)?;
    write_sidecar(&args.out, &RunMetadata::new("volume", 0, args))?;
    let max_ratio = field.ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("{} grid points, largest volume ratio {max_ratio:e}", field.len());
    Ok(0)
}

fn densest_training_point(model: &GpModel) -> DVector<f64> {
    model
        .latent_points()
        .iter()
        .map(|z| (model.posterior_mean_var(z).1, z))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, z)| z.clone())
        .expect("model has training points")
}

fn suffixed(path: &Path, kind: MetricKind) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("indicatrix");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{kind}.{ext}"))
}

fn run_indicatrix(args: &IndicatrixArgs) -> Result<i32> {
    let model = GpModel::load(&args.model)?;
    let center = match &args.at {
        Some(p) => DVector::from_column_slice(p),
        None => densest_training_point(&model),
    };
    if center.len() != model.dim_latent() {
        bail!("--at needs {} coordinates", model.dim_latent());
    }
    let p = model.metric_point(&center);
    let kinds = args
        .metric
        .kinds(&[MetricKind::Riemannian, MetricKind::Finsler, MetricKind::AlphaSigma]);
    let curves: Vec<Indicatrix> = kinds
        .iter()
        .map(|&k| indicatrix(&p, &center, args.angles, k))
        .collect::<latent_finsler::Result<_>>()?;
    let meta = RunMetadata::new("indicatrix", 0, args);
    let mut written = Vec::new();
    for c in &curves {
        let path = if curves.len() == 1 { args.out.clone() } else { suffixed(&args.out, c.kind) };
        c.write_csv(&path)?;
        write_sidecar(&path, &meta)?;
        written.push(path);
    }
    let center_str: Vec<String> = center.iter().map(|x| x.to_string()).collect();
    println!("center {}", center_str.join(","));
    let radii = |k| curves.iter().find(|c| c.kind == k).map(|c| &c.radii);
    if let (Some(rr), Some(rf)) = (radii(MetricKind::Riemannian), radii(MetricKind::Finsler)) {
        let dev = rr.iter().zip(rf).map(|(r, f)| (f - r).abs() / r).fold(0.0, f64::max);
        println!("max relative radius difference (finsler vs riemann) {dev:e}");
    }
    for w in written {
        log::info!("wrote {}", w.display());
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Generate(a) => run_generate(a),
        Command::Fit(a) => run_fit(a),
        Command::Geodesic(a) => run_geodesic(a),
        Command::Verify(a) => run_verify(a),
        Command::Volume(a) => run_volume(a),
        Command::Indicatrix(a) => run_indicatrix(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            process::exit(1);
        }
    }
}
