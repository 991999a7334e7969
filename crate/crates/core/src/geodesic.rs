//! Discrete curves, energy and length functionals, and energy minimization.
//!
//! A curve of `n` points is a piecewise-linear map on the uniform grid
//! `t_i = i/(n−1)`. Segment `i` has velocity `γ̇ᵢ = (pᵢ₊₁ − pᵢ)/Δt` and its
//! metric is evaluated at the segment midpoint, so
//! `E = Σᵢ N(γ̇ᵢ)² Δt` and `L = Σᵢ N(γ̇ᵢ) Δt`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::path::Path;
use std::sync::atomic::{self, AtomicBool};

use log::{debug, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{numbered_header, write_numeric_csv};
use crate::manifold::LatentMap;
use crate::metric::{MetricKind, MetricPoint};

pub const DEFAULT_CURVE_POINTS: usize = 64;
pub const DEFAULT_GRID: usize = 10;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Central-difference step for the spatial part of the energy gradient.
pub const FD_STEP: f64 = 1e-5;
const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    points: Vec<DVector<f64>>,
}

impl DiscreteCurve {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Domain(format!("a curve needs at least 3 points, got {}", points.len())));
        }
        let q = points[0].len();
        if q == 0 || points.iter().any(|p| p.len() != q) {
            return Err(Error::Shape("curve points must share one non-zero dimension".into()));
        }
        if points.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::Domain("curve has non-finite coordinates".into()));
        }
        Ok(Self { points })
    }

    pub fn straight_line(start: &DVector<f64>, end: &DVector<f64>, n: usize) -> Result<Self> {
        if start.len() != end.len() {
            return Err(Error::Shape("endpoints have different dimensions".into()));
        }
        let last = n.saturating_sub(1).max(1) as f64;
        Self::new((0..n).map(|i| start.lerp(end, i as f64 / last)).collect())
    }

    /// Resamples a polyline (at least two vertices) to `n` points equally
    /// spaced in latent arc length.
    pub fn from_polyline(vertices: &[DVector<f64>], n: usize) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Domain("a polyline needs at least two vertices".into()));
        }
        let mut cum = vec![0.0];
        for w in vertices.windows(2) {
            cum.push(cum.last().unwrap() + (&w[1] - &w[0]).norm());
        }
        let total = *cum.last().unwrap();
        if total == 0.0 {
            return Self::new(vec![vertices[0].clone(); n]);
        }
        let last = n.saturating_sub(1).max(1) as f64;
        let mut seg = 0;
        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            let s = total * i as f64 / last;
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let span = cum[seg + 1] - cum[seg];
            let t = if span > 0.0 { ((s - cum[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
            points.push(vertices[seg].lerp(&vertices[seg + 1], t));
        }
        points[0] = vertices[0].clone();
        points[n - 1] = vertices[vertices.len() - 1].clone();
        Self::new(points)
    }

    pub fn resample(&self, n: usize) -> Result<Self> {
        Self::from_polyline(&self.points, n)
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.points[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        &self.points[self.points.len() - 1]
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.points.len() - 1) as f64
    }

    pub fn velocities(&self) -> Vec<DVector<f64>> {
        let dt = self.dt();
        self.points.windows(2).map(|w| (&w[1] - &w[0]) / dt).collect()
    }

    pub fn midpoints(&self) -> Vec<DVector<f64>> {
        self.points.windows(2).map(|w| (&w[0] + &w[1]) * 0.5).collect()
    }

    pub fn euclidean_length(&self) -> f64 {
        self.points.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
    }

    fn interior_flat(&self) -> Vec<f64> {
        self.points[1..self.points.len() - 1]
            .iter()
            .flat_map(|p| p.iter().copied())
            .collect()
    }

    fn with_interior(&self, flat: &[f64]) -> Self {
        let q = self.dim();
        let mut points = self.points.clone();
        let n = points.len();
        for (k, p) in points[1..n - 1].iter_mut().enumerate() {
            p.copy_from_slice(&flat[k * q..(k + 1) * q]);
        }
        Self { points }
    }

    /// CSV with columns `t, z1..zq` and, when `decoder` is given, the decoded
    /// mean `f1..fD`.
    pub fn write_csv(&self, path: &Path, decoder: Option<&dyn LatentMap>) -> Result<()> {
        let q = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend(numbered_header("z", q));
        if let Some(map) = decoder {
            header.extend(numbered_header("f", map.dim_data()));
        }
        let dt = self.dt();
        let rows = self.points.iter().enumerate().map(|(i, p)| {
            let mut row = vec![i as f64 * dt];
            row.extend(p.iter());
            if let Some(map) = decoder {
                row.extend(map.decode_mean(p).iter());
            }
            row
        });
        write_numeric_csv(path, &header, rows)
    }
}

fn check_curve<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve) -> Result<()> {
    if c.dim() != map.dim_latent() {
        return Err(Error::Shape(format!(
            "curve lives in R^{} but the map has {} latent dimensions",
            c.dim(),
            map.dim_latent()
        )));
    }
    Ok(())
}

/// Warns the first time a curve outside the model's latent box is evaluated.
fn warn_outside_bounds<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve) {
    static WARNED: AtomicBool = AtomicBool::new(false);
    if WARNED.load(atomic::Ordering::Relaxed) {
        return;
    }
    if let Some((lo, hi)) = map.latent_bounds() {
        let outside = c
            .points()
            .iter()
            .any(|p| p.iter().zip(lo.iter().zip(hi.iter())).any(|(x, (l, h))| x < l || x > h));
        if outside && !WARNED.swap(true, atomic::Ordering::Relaxed) {
            warn!("curve leaves the latent bounding box of the model (reported once)");
        }
    }
}

/// `N(v)` for the straight segment `a → b` traversed in time `dt`, evaluated at
/// the midpoint.
fn segment_norm<M: LatentMap + ?Sized>(
    map: &M,
    a: &DVector<f64>,
    b: &DVector<f64>,
    dt: f64,
    kind: MetricKind,
) -> Result<f64> {
    let v = (b - a) / dt;
    if kind == MetricKind::Euclidean {
        return Ok(v.norm());
    }
    map.metric_point(&((a + b) * 0.5)).norm(kind, &v)
}

/// Metric norm of every segment velocity.
pub fn segment_speeds<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve, kind: MetricKind) -> Result<Vec<f64>> {
    check_curve(map, c)?;
    let dt = c.dt();
    (0..c.n_points() - 1)
        .into_par_iter()
        .map(|i| segment_norm(map, &c.points[i], &c.points[i + 1], dt, kind))
        .collect()
}

/// `Σᵢ N(γ̇ᵢ)² Δt`.
pub fn energy<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve, kind: MetricKind) -> Result<f64> {
    warn_outside_bounds(map, c);
    energy_unchecked(map, c, kind)
}

fn energy_unchecked<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve, kind: MetricKind) -> Result<f64> {
    let speeds = segment_speeds(map, c, kind)?;
    Ok(speeds.iter().map(|s| s * s).sum::<f64>() * c.dt())
}

/// `Σᵢ N(γ̇ᵢ) Δt`.
pub fn curve_length<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve, kind: MetricKind) -> Result<f64> {
    let speeds = segment_speeds(map, c, kind)?;
    Ok(speeds.iter().sum::<f64>() * c.dt())
}

/// `Σᵢ γ̇ᵢᵀ(E[Jᵢ]ᵀE[Jᵢ] + DΣᵢ)γ̇ᵢ Δt`.
pub fn energy_riemannian<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve) -> Result<f64> {
    energy(map, c, MetricKind::Riemannian)
}

/// `Σᵢ F(γ̇ᵢ)² Δt`.
pub fn energy_finsler<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve) -> Result<f64> {
    energy(map, c, MetricKind::Finsler)
}

/// Length of the decoded mean curve in data space.
pub fn ambient_length<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve) -> f64 {
    let decoded: Vec<DVector<f64>> = c.points().par_iter().map(|p| map.decode_mean(p)).collect();
    decoded.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// Average predictive variance over the curve points.
pub fn mean_posterior_variance<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve) -> f64 {
    let vars: Vec<f64> = c.points().par_iter().map(|p| map.posterior_variance(p)).collect();
    vars.iter().sum::<f64>() / c.n_points() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// Analytic derivative in the velocity, central differences in the
    /// midpoint position.
    #[default]
    Hybrid,
    /// Central differences in every interior coordinate.
    FiniteDifference,
}

fn segment_energy<M: LatentMap + ?Sized>(
    map: &M,
    a: &DVector<f64>,
    b: &DVector<f64>,
    dt: f64,
    kind: MetricKind,
) -> Result<f64> {
    let n = segment_norm(map, a, b, dt, kind)?;
    Ok(n * n * dt)
}

/// `(∂/∂pᵢ, ∂/∂pᵢ₊₁)` of one segment's energy.
fn segment_energy_gradient<M: LatentMap + ?Sized>(
    map: &M,
    a: &DVector<f64>,
    b: &DVector<f64>,
    dt: f64,
    kind: MetricKind,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let q = a.len();
    let v = (b - a) / dt;
    if kind == MetricKind::Euclidean {
        let g = &v * 2.0;
        return Ok((-&g, g));
    }
    let mid = (a + b) * 0.5;
    let gv = map.metric_point(&mid).norm_sq_gradient(kind, &v)?;
    let mut gm = DVector::zeros(q);
    for j in 0..q {
        let mut plus = mid.clone();
        let mut minus = mid.clone();
        plus[j] += FD_STEP;
        minus[j] -= FD_STEP;
        let ep = map.metric_point(&plus).norm(kind, &v)?;
        let em = map.metric_point(&minus).norm(kind, &v)?;
        gm[j] = (ep * ep - em * em) / (2.0 * FD_STEP);
    }
    let half = gm * (0.5 * dt);
    Ok((&half - &gv, half + gv))
}

/// Gradient of [`energy`] with respect to the interior points, one vector per
/// interior point.
pub fn energy_gradient<M: LatentMap + ?Sized>(
    map: &M,
    c: &DiscreteCurve,
    kind: MetricKind,
    mode: GradientMode,
) -> Result<Vec<DVector<f64>>> {
    check_curve(map, c)?;
    let n = c.n_points();
    let q = c.dim();
    let dt = c.dt();
    let pts = &c.points;
    match mode {
        GradientMode::Hybrid => {
            let parts: Vec<(DVector<f64>, DVector<f64>)> = (0..n - 1)
                .into_par_iter()
                .map(|i| segment_energy_gradient(map, &pts[i], &pts[i + 1], dt, kind))
                .collect::<Result<_>>()?;
            Ok((1..n - 1).map(|k| &parts[k - 1].1 + &parts[k].0).collect())
        }
        GradientMode::FiniteDifference => (1..n - 1)
            .into_par_iter()
            .map(|k| {
                let mut g = DVector::zeros(q);
                for j in 0..q {
                    let local = |delta: f64| -> Result<f64> {
                        let mut p = pts[k].clone();
                        p[j] += delta;
                        Ok(segment_energy(map, &pts[k - 1], &p, dt, kind)?
                            + segment_energy(map, &p, &pts[k + 1], dt, kind)?)
                    };
                    g[j] = (local(FD_STEP)? - local(-FD_STEP)?) / (2.0 * FD_STEP);
                }
                Ok(g)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Convergence requires a relative energy decrease below `tol` across this
    /// many iterations.
    pub window: usize,
    pub mode: GradientMode,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: DEFAULT_TOL,
            window: 10,
            mode: GradientMode::Hybrid,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeodesicResult {
    pub curve: DiscreteCurve,
    pub energy: f64,
    pub length: f64,
    pub metric_kind: MetricKind,
    pub iterations: usize,
    pub converged: bool,
    /// Energy of every accepted iterate, starting with the initial curve.
    pub energy_trace: Vec<f64>,
}

/// Solves `T x = rhs` for the `m × m` matrix `T = tridiag(−1, 2, −1)`.
fn solve_laplacian(rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for i in 0..m {
        let denom = 2.0 + prev_c;
        c[i] = -1.0 / denom;
        d[i] = (rhs[i] + prev_d) / denom;
        prev_c = c[i];
        prev_d = d[i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        x[i] = d[i] - c[i] * if i + 1 < m { x[i + 1] } else { 0.0 };
    }
    x
}

/// Descent direction `−(Δt/2) T⁻¹ g`, applied per coordinate. It is the
/// Newton step for the Euclidean energy, so unit steps are natural when the
/// metric is close to the identity.
fn preconditioned_direction(grad: &[DVector<f64>], dt: f64) -> Vec<f64> {
    let m = grad.len();
    let q = grad[0].len();
    let mut dir = vec![0.0; m * q];
    for j in 0..q {
        let rhs: Vec<f64> = grad.iter().map(|g| g[j]).collect();
        for (k, x) in solve_laplacian(&rhs).into_iter().enumerate() {
            dir[k * q + j] = -0.5 * dt * x;
        }
    }
    dir
}

pub fn minimize_energy<M: LatentMap + ?Sized>(
    map: &M,
    init: &DiscreteCurve,
    kind: MetricKind,
    max_iter: usize,
    tol: f64,
) -> Result<GeodesicResult> {
    let opts = MinimizeOptions {
        max_iter,
        tol,
        ..MinimizeOptions::default()
    };
    minimize_energy_with(map, init, kind, &opts)
}

/// Preconditioned gradient descent on the interior points with Armijo
/// backtracking. Every accepted step strictly lowers the energy.
pub fn minimize_energy_with<M: LatentMap + ?Sized>(
    map: &M,
    init: &DiscreteCurve,
    kind: MetricKind,
    opts: &MinimizeOptions,
) -> Result<GeodesicResult> {
    check_curve(map, init)?;
    let mut curve = init.clone();
    let mut e = energy(map, &curve, kind)?;
    let mut trace = vec![e];
    let dt = curve.dt();
    // Initial step from the ratio of Euclidean to metric energy.
    let euclid = energy_unchecked(map, &curve, MetricKind::Euclidean)?;
    let mut step = if e > 0.0 && euclid > 0.0 { euclid / e } else { 1.0 };
    let mut converged = e == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let grad = energy_gradient(map, &curve, kind, opts.mode)?;
        let dir = preconditioned_direction(&grad, dt);
        let slope: f64 = grad.iter().flat_map(|g| g.iter()).zip(&dir).map(|(g, d)| g * d).sum();
        if slope >= 0.0 || -slope * step <= opts.tol * e * 1e-3 {
            converged = true;
            break;
        }
        let x0 = curve.interior_flat();
        let mut t = (step * 2.0).min(1e6 * step.max(1.0));
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x0.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let cand = curve.with_interior(&trial);
            let ec = energy_unchecked(map, &cand, kind)?;
            if ec.is_finite() && ec <= e + ARMIJO_C * t * slope {
                accepted = Some((cand, ec));
                break;
            }
            t *= BACKTRACK;
        }
        let Some((cand, ec)) = accepted else {
            // No decrease along a descent direction: numerically stationary.
            converged = -slope * step <= opts.tol * e.max(f64::MIN_POSITIVE);
            debug!("line search failed after {iterations} iterations");
            break;
        };
        step = t;
        curve = cand;
        e = ec;
        trace.push(e);
        let k = trace.len() - 1;
        if k >= opts.window && trace[k - opts.window] - e <= opts.tol * e {
            converged = true;
        }
    }
    let length = curve_length(map, &curve, kind)?;
    Ok(GeodesicResult {
        curve,
        energy: e,
        length,
        metric_kind: kind,
        iterations,
        converged,
        energy_trace: trace,
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize, target: usize) -> Option<Vec<usize>> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut prev = vec![usize::MAX; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse(Frontier(0.0, source)));
    while let Some(Reverse(Frontier(d, u))) = heap.pop() {
        if u == target {
            break;
        }
        if d > dist[u] {
            continue;
        }
        for &(w, cost) in &adj[u] {
            let nd = d + cost;
            if nd < dist[w] {
                dist[w] = nd;
                prev[w] = u;
                heap.push(Reverse(Frontier(nd, w)));
            }
        }
    }
    if !dist[target].is_finite() {
        return None;
    }
    let mut path = vec![target];
    while *path.last().unwrap() != source {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    Some(path)
}

/// Axis-aligned box used for grid initialization: the map's own bounds when it
/// has them, widened to contain both endpoints.
fn grid_box<M: LatentMap + ?Sized>(map: &M, start: &DVector<f64>, end: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (mut lo, mut hi) = map.latent_bounds().unwrap_or_else(|| {
        let lo = start.inf(end);
        let hi = start.sup(end);
        let span = (&hi - &lo).amax().max(1e-3);
        (lo.add_scalar(-0.1 * span), hi.add_scalar(0.1 * span))
    });
    for p in [start, end] {
        if p.iter().zip(lo.iter().zip(hi.iter())).any(|(x, (l, h))| x < l || x > h) {
            warn!("endpoint outside the latent bounding box; widening the grid");
        }
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Metric length of the straight chord `a → b`, split into pieces no longer
/// than `max_piece` in latent distance.
fn chord_length<M: LatentMap + ?Sized>(
    map: &M,
    a: &DVector<f64>,
    b: &DVector<f64>,
    max_piece: f64,
    kind: MetricKind,
) -> Result<f64> {
    let pieces = ((b - a).norm() / max_piece).ceil().max(1.0) as usize;
    let mut total = 0.0;
    for i in 0..pieces {
        let p0 = a.lerp(b, i as f64 / pieces as f64);
        let p1 = a.lerp(b, (i + 1) as f64 / pieces as f64);
        total += segment_norm(map, &p0, &p1, 1.0, kind)?;
    }
    Ok(total)
}

/// Shortest path between `start` and `end` on the 8-connected
/// `grid × grid` lattice spanning the latent box. Edge weights are segment
/// lengths under `kind`, evaluated at edge midpoints. The endpoints are
/// joined to the corners of the cells that contain them.
pub fn grid_path<M: LatentMap + ?Sized>(
    map: &M,
    start: &DVector<f64>,
    end: &DVector<f64>,
    grid: usize,
    kind: MetricKind,
) -> Result<Vec<DVector<f64>>> {
    if map.dim_latent() != 2 || start.len() != 2 || end.len() != 2 {
        return Err(Error::Unsupported("grid initialization needs a 2-D latent space".into()));
    }
    if grid < 2 {
        return Err(Error::Domain("grid must have at least 2 nodes per side".into()));
    }
    let (lo, hi) = grid_box(map, start, end);
    let step = (&hi - &lo) / (grid - 1) as f64;
    let node = |i: usize, j: usize| DVector::from_vec(vec![lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]]);
    let mut nodes: Vec<DVector<f64>> = (0..grid * grid).map(|k| node(k / grid, k % grid)).collect();
    let src = nodes.len();
    let dst = src + 1;
    nodes.push(start.clone());
    nodes.push(end.clone());

    let mut edges = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            let k = i * grid + j;
            for (di, dj) in [(1i64, 0i64), (0, 1), (1, 1), (1, -1)] {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni >= 0 && nj >= 0 && (ni as usize) < grid && (nj as usize) < grid {
                    edges.push((k, ni as usize * grid + nj as usize));
                }
            }
        }
    }
    for (id, p) in [(src, start), (dst, end)] {
        let cell = |c: usize| {
            let s = step[c].max(f64::MIN_POSITIVE);
            (((p[c] - lo[c]) / s).floor().max(0.0) as usize).min(grid - 2)
        };
        let (ci, cj) = (cell(0), cell(1));
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            edges.push((id, (ci + di) * grid + cj + dj));
        }
    }
    let weights: Vec<f64> = edges
        .par_iter()
        .map(|&(a, b)| segment_norm(map, &nodes[a], &nodes[b], 1.0, kind))
        .collect::<Result<_>>()?;
    let mut adj = vec![Vec::new(); nodes.len()];
    for (&(a, b), &w) in edges.iter().zip(&weights) {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let path = dijkstra(&adj, src, dst).ok_or_else(|| Error::Domain("grid graph is disconnected".into()))?;
    Ok(path.into_iter().map(|k| nodes[k].clone()).collect())
}

/// Dijkstra path on the latent grid, shortened by replacing runs of vertices
/// with straight chords wherever the chord is no longer under the metric, then
/// resampled to `n_points`.
pub fn grid_initialize<M: LatentMap + ?Sized>(
    map: &M,
    start: &DVector<f64>,
    end: &DVector<f64>,
    grid: usize,
    kind: MetricKind,
    n_points: usize,
) -> Result<DiscreteCurve> {
    let path = grid_path(map, start, end, grid, kind)?;
    let (lo, hi) = grid_box(map, start, end);
    let piece = 0.5 * ((&hi - &lo) / (grid - 1) as f64).amin().max(1e-12);
    let m = path.len();
    let mut hop = vec![0.0; m];
    for i in 1..m {
        hop[i] = chord_length(map, &path[i - 1], &path[i], piece, kind)?;
    }
    let mut pulled = vec![path[0].clone()];
    let mut i = 0;
    while i + 1 < m {
        let mut next = i + 1;
        for j in (i + 2..m).rev() {
            let along: f64 = hop[i + 1..=j].iter().sum();
            if chord_length(map, &path[i], &path[j], piece, kind)? <= along * (1.0 + 1e-12) {
                next = j;
                break;
            }
        }
        pulled.push(path[next].clone());
        i = next;
    }
    DiscreteCurve::from_polyline(&pulled, n_points)
}

/// Summary of one geodesic run, ready for a comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicSummary {
    pub metric: MetricKind,
    pub length_riemann: f64,
    pub length_finsler: f64,
    pub length_alpha_sigma: f64,
    pub energy: f64,
    pub ambient_length: f64,
    pub mean_variance: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn summarize<M: LatentMap + ?Sized>(map: &M, r: &GeodesicResult) -> Result<GeodesicSummary> {
    Ok(GeodesicSummary {
        metric: r.metric_kind,
        length_riemann: curve_length(map, &r.curve, MetricKind::Riemannian)?,
        length_finsler: curve_length(map, &r.curve, MetricKind::Finsler)?,
        length_alpha_sigma: curve_length(map, &r.curve, MetricKind::AlphaSigma)?,
        energy: r.energy,
        ambient_length: ambient_length(map, &r.curve),
        mean_variance: mean_posterior_variance(map, &r.curve),
        iterations: r.iterations,
        converged: r.converged,
    })
}

/// Metric points at every segment midpoint.
pub fn midpoint_metrics<M: LatentMap + ?Sized>(map: &M, c: &DiscreteCurve) -> Vec<MetricPoint> {
    c.midpoints().par_iter().map(|m| map.metric_point(m)).collect()
}
