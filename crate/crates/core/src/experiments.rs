//! Verification sweeps: random inequality checks, the high-dimension
//! truncation study, the energy-gap variance identity and geodesic
//! comparisons.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::{
    curve_length, energy, grid_initialize, minimize_energy_with, summarize, DiscreteCurve, GeodesicSummary,
    MinimizeOptions,
};
use crate::gp::{GpModel, Kernel};
use crate::io::{format_float, write_csv};
use crate::manifold::LatentMap;
use crate::measure::{bh_volume, riemannian_volume};
use crate::metric::{MetricKind, MetricPoint, BOUND_SLACK};
use crate::randmat::{derive_seed, norm_sample_stats, rng_from_seed, WishartSpec};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed, configuration and library version written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<T: Serialize> {
    pub command: String,
    pub seed: u64,
    pub library_version: &'static str,
    pub config: T,
}

impl<T: Serialize> RunMetadata<T> {
    pub fn new(command: impl Into<String>, seed: u64, config: T) -> Self {
        Self {
            command: command.into(),
            seed,
            library_version: LIBRARY_VERSION,
            config,
        }
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

/// A random metric point and tangent direction.
#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub point: MetricPoint,
    pub v: DVector<f64>,
}

/// `D` and `q` uniform on the given inclusive ranges. The mean Jacobian and the
/// covariance factor have independent log-uniform scales in `[10⁻², 10]`, so
/// the sweep covers `ω` from nearly central to nearly deterministic. One spec
/// in ten is exactly central.
pub fn random_spec(rng: &mut ChaCha8Rng, dims: (usize, usize), latent: (usize, usize)) -> Result<RandomSpec> {
    let d = rng.random_range(dims.0..=dims.1);
    let q = rng.random_range(latent.0..=latent.1);
    let mean_scale = if rng.random_bool(0.1) { 0.0 } else { log_uniform(rng, 1e-2, 10.0) };
    let mean = normal_matrix(rng, d, q) * mean_scale;
    let a = normal_matrix(rng, q, q) * log_uniform(rng, 1e-2, 10.0);
    let cov = a.transpose() * &a + DMatrix::identity(q, q) * 1e-6;
    let v = normal_vector(rng, q);
    Ok(RandomSpec {
        point: MetricPoint::from_parts(mean, cov)?,
        v,
    })
}

/// `n` specs, the `i`-th drawn from seed `derive_seed(seed, i)`.
pub fn random_specs(n: usize, seed: u64, dims: (usize, usize), latent: (usize, usize)) -> Result<Vec<RandomSpec>> {
    (0..n)
        .into_par_iter()
        .map(|i| random_spec(&mut rng_from_seed(derive_seed(seed, i as u64)), dims, latent))
        .collect()
}

/// A GP fitted (with fixed hyperparameters) to `Y = sin(Z W + b)` for latent
/// points uniform on `[−1, 1]^q`.
pub fn synthetic_gp(n: usize, q: usize, d: usize, lengthscale: f64, noise: f64, seed: u64) -> Result<GpModel> {
    let mut rng = rng_from_seed(seed);
    let z = DMatrix::from_fn(n, q, |_, _| rng.random_range(-1.0..1.0));
    let w = normal_matrix(&mut rng, q, d);
    let b = DVector::from_fn(d, |_, _| rng.random_range(0.0..std::f64::consts::TAU));
    let mut y = &z * &w;
    for mut row in y.row_iter_mut() {
        for (x, bj) in row.iter_mut().zip(b.iter()) {
            *x = (*x + bj).sin();
        }
    }
    GpModel::new(Kernel::rbf(lengthscale, 1.0)?, noise, &z, &y)
}

/// A random curve between two points of `[−0.8, 0.8]^q` with a sinusoidal
/// bend.
pub fn random_curve(rng: &mut ChaCha8Rng, q: usize, n_points: usize) -> Result<DiscreteCurve> {
    let a = DVector::from_fn(q, |_, _| rng.random_range(-0.8..0.8));
    let b = DVector::from_fn(q, |_, _| rng.random_range(-0.8..0.8));
    let bend = normal_vector(rng, q) * 0.2;
    let freq = rng.random_range(1..=3) as f64;
    let last = (n_points - 1) as f64;
    DiscreteCurve::new(
        (0..n_points)
            .map(|i| {
                let t = i as f64 / last;
                a.lerp(&b, t) + &bend * (std::f64::consts::PI * freq * t).sin()
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundSweepConfig {
    pub n_specs: usize,
    pub n_curves: usize,
    pub n_volume_points: usize,
    pub seed: u64,
    /// Harness self-test: corrupts one Finsler value so the sweep must fail.
    pub inject_violation: bool,
}

impl BoundSweepConfig {
    pub fn new(n_specs: usize, seed: u64) -> Self {
        Self {
            n_specs,
            n_curves: (n_specs / 10).max(1),
            n_volume_points: (n_specs / 50).max(1),
            seed,
            inject_violation: false,
        }
    }
}

/// Violation counts for every inequality checked by [`bound_sweep`]. All
/// comparisons use the absolute slack [`BOUND_SLACK`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundSweepReport {
    pub n_specs: usize,
    pub n_curves: usize,
    pub n_volume_points: usize,
    pub norm_lower: usize,
    pub norm_upper: usize,
    pub gap_negative: usize,
    pub gap_bound: usize,
    pub jensen_mismatch: usize,
    pub length_order: usize,
    pub energy_order: usize,
    pub length_energy: usize,
    pub volume_order: usize,
    pub volume_ratio_bound: usize,
    pub max_gap_over_bound: f64,
}

impl BoundSweepReport {
    pub fn total_violations(&self) -> usize {
        self.norm_lower
            + self.norm_upper
            + self.gap_negative
            + self.gap_bound
            + self.jensen_mismatch
            + self.length_order
            + self.energy_order
            + self.length_energy
            + self.volume_order
            + self.volume_ratio_bound
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let value = serde_json::to_value(self)?;
        let obj = value.as_object().expect("report serializes to an object");
        let header = vec!["check".to_string(), "value".to_string()];
        let rows = obj.iter().map(|(k, v)| vec![k.clone(), v.to_string()]);
        write_csv(path, &header, rows)
    }
}

fn exceeds(a: f64, b: f64) -> bool {
    !(a <= b + BOUND_SLACK)
}

#[derive(Default)]
struct SpecChecks {
    lower: bool,
    upper: bool,
    negative: bool,
    bound: bool,
    jensen: bool,
    ratio: f64,
}

fn check_spec(s: &RandomSpec, corrupt: bool) -> Result<SpecChecks> {
    let r = s.point.bound_report(&s.v)?;
    let finsler = if corrupt { r.upper * 1.5 + 1.0 } else { r.finsler };
    let g = s.point.relative_gap(&s.v)?;
    let gap = if corrupt { (r.upper - finsler) / r.upper } else { g.gap };
    Ok(SpecChecks {
        lower: exceeds(r.lower, finsler),
        upper: exceeds(finsler, r.upper),
        negative: gap < -BOUND_SLACK,
        bound: exceeds(gap, g.wishart_bound),
        jensen: (g.jensen_bound - g.wishart_bound).abs() > 1e-9 * g.wishart_bound.max(1.0),
        ratio: if g.wishart_bound > 0.0 { gap / g.wishart_bound } else { 0.0 },
    })
}

#[derive(Default)]
struct CurveChecks {
    length: bool,
    energy: bool,
    length_energy: bool,
}

fn check_curve(seed: u64) -> Result<CurveChecks> {
    let mut rng = rng_from_seed(seed);
    let q = rng.random_range(1..=3);
    let d = rng.random_range(1..=20);
    let model = synthetic_gp(10, q, d, rng.random_range(0.3..1.0), 1e-2, rng.random())?;
    let curve = random_curve(&mut rng, q, 16)?;
    let l = |k| curve_length(&model, &curve, k);
    let e = |k| energy(&model, &curve, k);
    let (la, lf, lr) = (l(MetricKind::AlphaSigma)?, l(MetricKind::Finsler)?, l(MetricKind::Riemannian)?);
    let (ea, ef, er) = (e(MetricKind::AlphaSigma)?, e(MetricKind::Finsler)?, e(MetricKind::Riemannian)?);
    Ok(CurveChecks {
        length: exceeds(la, lf) || exceeds(lf, lr),
        energy: exceeds(ea, ef) || exceeds(ef, er),
        length_energy: exceeds(la * la, ea) || exceeds(lf * lf, ef) || exceeds(lr * lr, er),
    })
}

fn check_volume(seed: u64) -> Result<(bool, bool)> {
    let mut rng = rng_from_seed(seed);
    let s = random_spec(&mut rng, (1, 100), (2, 2))?;
    let vr = bh_volume(&s.point, 256, MetricKind::Riemannian)?;
    let vf = bh_volume(&s.point, 256, MetricKind::Finsler)?;
    let va = bh_volume(&s.point, 256, MetricKind::AlphaSigma)?;
    let order = exceeds(va, vf) || exceeds(vf, vr);
    let ratio = exceeds((vr - vf) / vr, s.point.volume_gap_bound());
    Ok((order, ratio))
}

/// Checks every norm, functional and volume inequality on random inputs.
/// The norm checks use `D ∈ [1, 100]`, `q ∈ [1, 5]`.
pub fn bound_sweep_with(cfg: &BoundSweepConfig) -> Result<BoundSweepReport> {
    if cfg.n_specs < 100 {
        return Err(Error::Domain(format!("bound sweep needs at least 100 specs, got {}", cfg.n_specs)));
    }
    let specs = random_specs(cfg.n_specs, derive_seed(cfg.seed, 0), (1, 100), (1, 5))?;
    let spec_checks: Vec<SpecChecks> = specs
        .par_iter()
        .enumerate()
        .map(|(i, s)| check_spec(s, cfg.inject_violation && i == 0))
        .collect::<Result<_>>()?;
    let curve_seed = derive_seed(cfg.seed, 1);
    let curve_checks: Vec<CurveChecks> = (0..cfg.n_curves)
        .into_par_iter()
        .map(|i| check_curve(derive_seed(curve_seed, i as u64)))
        .collect::<Result<_>>()?;
    let volume_seed = derive_seed(cfg.seed, 2);
    let volume_checks: Vec<(bool, bool)> = (0..cfg.n_volume_points)
        .into_par_iter()
        .map(|i| check_volume(derive_seed(volume_seed, i as u64)))
        .collect::<Result<_>>()?;
    let count = |f: &dyn Fn(&SpecChecks) -> bool| spec_checks.iter().filter(|c| f(c)).count();
    let count_curves = |f: &dyn Fn(&CurveChecks) -> bool| curve_checks.iter().filter(|c| f(c)).count();
    Ok(BoundSweepReport {
        n_specs: cfg.n_specs,
        n_curves: cfg.n_curves,
        n_volume_points: cfg.n_volume_points,
        norm_lower: count(&|c| c.lower),
        norm_upper: count(&|c| c.upper),
        gap_negative: count(&|c| c.negative),
        gap_bound: count(&|c| c.bound),
        jensen_mismatch: count(&|c| c.jensen),
        length_order: count_curves(&|c| c.length),
        energy_order: count_curves(&|c| c.energy),
        length_energy: count_curves(&|c| c.length_energy),
        volume_order: volume_checks.iter().filter(|c| c.0).count(),
        volume_ratio_bound: volume_checks.iter().filter(|c| c.1).count(),
        max_gap_over_bound: spec_checks.iter().map(|c| c.ratio).fold(0.0, f64::max),
    })
}

pub fn bound_sweep(n_specs: usize, seed: u64) -> Result<BoundSweepReport> {
    bound_sweep_with(&BoundSweepConfig::new(n_specs, seed))
}

/// One `(E[J], Σ)` pair with `D_max` rows; smaller `D` use the first `D` rows.
#[derive(Debug, Clone)]
pub struct TruncationSpec {
    pub mean: DMatrix<f64>,
    pub cov: DMatrix<f64>,
}

impl TruncationSpec {
    pub fn truncate(&self, d: usize) -> Result<MetricPoint> {
        if d == 0 || d > self.mean.nrows() {
            return Err(Error::Domain(format!("cannot truncate {} rows to {d}", self.mean.nrows())));
        }
        MetricPoint::from_parts(self.mean.rows(0, d).into_owned(), self.cov.clone())
    }

    /// `m = max |E[J]ᵢⱼ|`.
    pub fn entry_bound(&self) -> f64 {
        self.mean.amax()
    }
}

/// `E[J]` entries uniform on `[−1, 1]`, `Σ = AᵀA + 0.1 I` with standard normal
/// `A`.
pub fn bounded_ensemble(n_specs: usize, d_max: usize, q: usize, seed: u64) -> Vec<TruncationSpec> {
    (0..n_specs)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let mean = DMatrix::from_fn(d_max, q, |_, _| rng.random_range(-1.0..=1.0));
            let a = normal_matrix(&mut rng, q, q);
            let cov = a.transpose() * &a + DMatrix::identity(q, q) * 0.1;
            TruncationSpec { mean, cov }
        })
        .collect()
}

/// Zero mean Jacobian with `Σ = I`.
pub fn central_ensemble(n_specs: usize, d_max: usize, q: usize) -> Vec<TruncationSpec> {
    (0..n_specs)
        .map(|_| TruncationSpec {
            mean: DMatrix::zeros(d_max, q),
            cov: DMatrix::identity(q, q),
        })
        .collect()
}

/// Dimensions `lo, 2lo, 4lo, … ≤ hi`.
pub fn dyadic_dims(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo.max(1)), |d| Some(d * 2))
        .take_while(|&d| d <= hi)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub d: usize,
    pub gap_norm: f64,
    /// Mean relative volume gap `(V_R − V_F)/V_R`; NaN unless `q = 2`.
    pub gap_volume: f64,
    /// Mean of `1/(D+ω) + ω/(D+ω)²` over the same directions.
    pub bound: f64,
    pub gap_times_d: f64,
    /// `1 + M` with `M = max m²‖v‖²/(vᵀΣv)` over specs and directions.
    pub one_plus_m: f64,
    /// Largest direction-wise `gap / bound`.
    pub max_gap_over_bound: f64,
}

/// Per-dimension gaps averaged over the ensemble and `v_samples` random unit
/// directions per spec. The directions are drawn once per spec and shared by
/// every `D`.
pub fn truncation_sweep(
    ensemble: &[TruncationSpec],
    dims: &[usize],
    v_samples: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    if ensemble.is_empty() || v_samples == 0 {
        return Err(Error::Domain("truncation sweep needs specs and directions".into()));
    }
    if dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("dimensions must be strictly increasing".into()));
    }
    let q = ensemble[0].cov.nrows();
    let directions: Vec<Vec<DVector<f64>>> = (0..ensemble.len())
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            (0..v_samples).map(|_| normal_vector(&mut rng, q).normalize()).collect()
        })
        .collect();
    let m = ensemble
        .iter()
        .zip(&directions)
        .flat_map(|(s, vs)| {
            let bound = s.entry_bound();
            vs.iter().map(move |v| bound * bound * v.norm_squared() / v.dot(&(&s.cov * v)))
        })
        .fold(0.0, f64::max);
    dims.par_iter()
        .map(|&d| {
            let mut gap = 0.0;
            let mut bound = 0.0;
            let mut worst: f64 = 0.0;
            let mut vol = 0.0;
            for (spec, vs) in ensemble.iter().zip(&directions) {
                let p = spec.truncate(d)?;
                for v in vs {
                    let g = p.relative_gap(v)?;
                    gap += g.gap;
                    bound += g.wishart_bound;
                    worst = worst.max(g.gap / g.wishart_bound);
                }
                if q == 2 {
                    let vr = bh_volume(&p, 256, MetricKind::Riemannian)?;
                    let vf = bh_volume(&p, 256, MetricKind::Finsler)?;
                    vol += (vr - vf) / vr;
                }
            }
            let n = (ensemble.len() * v_samples) as f64;
            let gap_norm = gap / n;
            Ok(ConvergenceRow {
                d,
                gap_norm,
                gap_volume: if q == 2 { vol / ensemble.len() as f64 } else { f64::NAN },
                bound: bound / n,
                gap_times_d: gap_norm * d as f64,
                one_plus_m: 1.0 + m,
                max_gap_over_bound: worst,
            })
        })
        .collect()
}

/// Pass/fail summary of a truncation sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCheck {
    /// `0 ≤ gap ≤ bound` in every direction of every row.
    pub gap_within_bound: bool,
    /// `D·gap ≤ 1 + M` in every row.
    pub scaled_gap_bounded: bool,
    /// Ensemble-average gap decreases strictly with `D`.
    pub gap_decreasing: bool,
    /// `D·gap` never increases between consecutive rows with `D ≥ from_d`.
    pub scaled_gap_nonincreasing: bool,
    /// First `D` at which `D·gap` increased, if any.
    pub first_increase_at: Option<usize>,
}

pub fn check_convergence(rows: &[ConvergenceRow], from_d: usize) -> ConvergenceCheck {
    let tail: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.d >= from_d).collect();
    let first_increase_at = tail.windows(2).find(|w| w[1].gap_times_d > w[0].gap_times_d).map(|w| w[1].d);
    ConvergenceCheck {
        gap_within_bound: rows.iter().all(|r| r.gap_norm >= 0.0 && r.max_gap_over_bound <= 1.0 + 1e-12),
        scaled_gap_bounded: rows.iter().all(|r| r.gap_times_d <= r.one_plus_m),
        gap_decreasing: rows.windows(2).all(|w| w[1].gap_norm < w[0].gap_norm),
        scaled_gap_nonincreasing: first_increase_at.is_none(),
        first_increase_at,
    }
}

pub fn write_convergence_csv(rows: &[ConvergenceRow], path: &Path) -> Result<()> {
    let header: Vec<String> = [
        "d",
        "gap_norm",
        "gap_volume",
        "bound",
        "gap_times_d",
        "one_plus_m",
        "max_gap_over_bound",
    ]
    .map(String::from)
    .to_vec();
    let rows = rows.iter().map(|r| {
        vec![
            r.d.to_string(),
            format_float(r.gap_norm),
            format_float(r.gap_volume),
            format_float(r.bound),
            format_float(r.gap_times_d),
            format_float(r.one_plus_m),
            format_float(r.max_gap_over_bound),
        ]
    });
    write_csv(path, &header, rows)
}

/// Monte-Carlo check of `E_R − E_F = Σᵢ Var[‖γ̇ᵢ‖_G] Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyGapCheck {
    pub energy_riemann: f64,
    pub energy_finsler: f64,
    pub mc_variance_integral: f64,
    pub standard_error: f64,
}

impl EnergyGapCheck {
    /// `|(E_R − E_F) − MC| / SE`.
    pub fn z_score(&self) -> f64 {
        let diff = (self.energy_riemann - self.energy_finsler - self.mc_variance_integral).abs();
        if self.standard_error > 0.0 {
            diff / self.standard_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn energy_gap_identity<M: LatentMap + ?Sized>(
    map: &M,
    curve: &DiscreteCurve,
    n_samples: usize,
    seed: u64,
) -> Result<EnergyGapCheck> {
    let dt = curve.dt();
    let parts: Vec<(f64, f64)> = curve
        .midpoints()
        .iter()
        .zip(curve.velocities())
        .enumerate()
        .map(|(i, (mid, v))| {
            if v.iter().all(|&x| x == 0.0) {
                return Ok((0.0, 0.0));
            }
            let spec = WishartSpec::from(&map.jacobian_posterior(mid));
            let stats = norm_sample_stats(&spec, &v, n_samples, derive_seed(seed, i as u64))?;
            Ok((stats.norm_var * dt, stats.norm_var_se * dt))
        })
        .collect::<Result<_>>()?;
    Ok(EnergyGapCheck {
        energy_riemann: energy(map, curve, MetricKind::Riemannian)?,
        energy_finsler: energy(map, curve, MetricKind::Finsler)?,
        mc_variance_integral: parts.iter().map(|p| p.0).sum(),
        standard_error: parts.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub pair: usize,
    #[serde(flatten)]
    pub summary: GeodesicSummary,
    /// `(L_R − L_F)/L_R` on this curve.
    pub relative_length_gap: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonOptions {
    pub grid: usize,
    pub n_points: usize,
    pub minimize: MinimizeOptions,
    pub kinds: Vec<MetricKind>,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self {
            grid: crate::geodesic::DEFAULT_GRID,
            n_points: crate::geodesic::DEFAULT_CURVE_POINTS,
            minimize: MinimizeOptions::default(),
            kinds: vec![MetricKind::Riemannian, MetricKind::Finsler, MetricKind::Euclidean],
        }
    }
}

/// Geodesics under each metric for every endpoint pair. 2-D maps start from
/// the grid initialization, others from the straight line. When `out_dir` is
/// given every curve is written as `pair{i}_{metric}.csv` with decoded means.
pub fn geodesic_comparison<M: LatentMap>(
    map: &M,
    endpoints: &[(DVector<f64>, DVector<f64>)],
    opts: &ComparisonOptions,
    out_dir: Option<&Path>,
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for (i, (a, b)) in endpoints.iter().enumerate() {
        for &kind in &opts.kinds {
            let init = if map.dim_latent() == 2 {
                grid_initialize(map, a, b, opts.grid, kind, opts.n_points)?
            } else {
                DiscreteCurve::straight_line(a, b, opts.n_points)?
            };
            let result = minimize_energy_with(map, &init, kind, &opts.minimize)?;
            if !result.converged {
                log::warn!("pair {i} under {kind}: optimizer stopped after {} iterations", result.iterations);
            }
            if let Some(dir) = out_dir {
                result
                    .curve
                    .write_csv(&dir.join(format!("pair{i}_{kind}.csv")), Some(map as &dyn LatentMap))?;
            }
            let summary = summarize(map, &result)?;
            let relative_length_gap = (summary.length_riemann - summary.length_finsler) / summary.length_riemann;
            rows.push(ComparisonRow {
                pair: i,
                summary,
                relative_length_gap,
            });
        }
    }
    Ok(rows)
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let header: Vec<String> = [
        "pair",
        "metric",
        "length_riemann",
        "length_finsler",
        "length_alpha_sigma",
        "energy",
        "ambient_length",
        "mean_variance",
        "relative_length_gap",
        "iterations",
        "converged",
    ]
    .map(String::from)
    .to_vec();
    let rows = rows.iter().map(|r| {
        let s = &r.summary;
        vec![
            r.pair.to_string(),
            s.metric.to_string(),
            format_float(s.length_riemann),
            format_float(s.length_finsler),
            format_float(s.length_alpha_sigma),
            format_float(s.energy),
            format_float(s.ambient_length),
            format_float(s.mean_variance),
            format_float(r.relative_length_gap),
            s.iterations.to_string(),
            s.converged.to_string(),
        ]
    });
    write_csv(path, &header, rows)
}

/// Relative gap at `D` for the central case, `1 − √2 Γ((D+1)/2)/(Γ(D/2)√D)`.
pub fn central_gap(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    let ratio = crate::specfun::log_gamma_ratio(half + 0.5, half)
        .expect("positive gamma arguments")
        .exp();
    1.0 - std::f64::consts::SQRT_2 * ratio / (d as f64).sqrt()
}

/// Convenience for tests and the CLI: `√det E[G]` vs. the Riemannian
/// Busemann-Hausdorff quadrature, as a relative difference.
pub fn riemannian_quadrature_error(p: &MetricPoint, k: usize) -> Result<f64> {
    let exact = riemannian_volume(p);
    Ok((bh_volume(p, k, MetricKind::Riemannian)? - exact).abs() / exact)
}
