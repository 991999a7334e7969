//! Indicatrices and Busemann-Hausdorff volumes for 2-D latent spaces.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::write_numeric_csv;
use crate::manifold::LatentMap;
use crate::metric::{MetricKind, MetricPoint};

pub const DEFAULT_INDICATRIX_ANGLES: usize = 64;
pub const DEFAULT_VOLUME_ANGLES: usize = 256;
pub const DEFAULT_VOLUME_GRID: usize = 32;
const CONVEXITY_SLACK: f64 = 1e-8;

fn require_planar(p: &MetricPoint) -> Result<()> {
    if p.dim_latent() != 2 {
        return Err(Error::Unsupported(format!(
            "indicatrices and volumes need a 2-D latent space, got {}",
            p.dim_latent()
        )));
    }
    Ok(())
}

fn direction(theta: f64) -> DVector<f64> {
    let (s, c) = theta.sin_cos();
    DVector::from_vec(vec![c, s])
}

/// The unit circle `{v : N(v) = 1}` sampled at `K` uniform angles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Indicatrix {
    pub center: Vec<f64>,
    pub kind: MetricKind,
    pub angles: Vec<f64>,
    pub radii: Vec<f64>,
}

impl Indicatrix {
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        self.angles
            .iter()
            .zip(&self.radii)
            .map(|(t, r)| [r * t.cos(), r * t.sin()])
            .collect()
    }

    /// Area of the polygon through the sampled points,
    /// `Σₖ ½ rₖ rₖ₊₁ sin(2π/K)`.
    pub fn area(&self) -> f64 {
        let k = self.radii.len();
        let s = (2.0 * PI / k as f64).sin();
        (0..k).map(|i| 0.5 * self.radii[i] * self.radii[(i + 1) % k] * s).sum()
    }

    /// Cross-product sign test on consecutive polygon edges.
    pub fn is_convex(&self) -> bool {
        let v = self.vertices();
        let k = v.len();
        (0..k).all(|i| {
            let (a, b, c) = (v[i], v[(i + 1) % k], v[(i + 2) % k]);
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            let scale = self.radii[i].max(self.radii[(i + 1) % k]).powi(2);
            cross >= -CONVEXITY_SLACK * scale
        })
    }

    /// CSV with columns `theta, r, x, y, center_1, center_2`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = ["theta", "r", "x", "y", "center_1", "center_2"].map(String::from).to_vec();
        let rows = self.angles.iter().zip(&self.radii).map(|(&t, &r)| {
            vec![t, r, r * t.cos(), r * t.sin(), self.center[0], self.center[1]]
        });
        write_numeric_csv(path, &header, rows)
    }
}

/// Radii `rₖ = 1/N(e(θₖ))` at `θₖ = 2πk/K`, exact by 1-homogeneity.
pub fn indicatrix(p: &MetricPoint, center: &DVector<f64>, k: usize, kind: MetricKind) -> Result<Indicatrix> {
    require_planar(p)?;
    if k < 16 {
        return Err(Error::Domain(format!("indicatrix needs at least 16 angles, got {k}")));
    }
    let angles: Vec<f64> = (0..k).map(|i| 2.0 * PI * i as f64 / k as f64).collect();
    // For even K the opposite half reuses negated directions, so that
    // r(θ + π) = r(θ) holds bit for bit on reversible metrics.
    let dirs: Vec<DVector<f64>> = (0..k)
        .map(|i| {
            if k % 2 == 0 && i >= k / 2 {
                -direction(angles[i - k / 2])
            } else {
                direction(angles[i])
            }
        })
        .collect();
    let radii = angles
        .iter()
        .zip(&dirs)
        .map(|(&t, e)| {
            let n = p.norm(kind, e)?;
            if n > 0.0 {
                Ok(1.0 / n)
            } else {
                Err(Error::Domain(format!("metric vanishes in direction θ = {t}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Indicatrix {
        center: center.iter().copied().collect(),
        kind,
        angles,
        radii,
    })
}

/// Busemann-Hausdorff volume density `π / area({N < 1})` by polygonal polar
/// quadrature with `K` angles.
pub fn bh_volume(p: &MetricPoint, k: usize, kind: MetricKind) -> Result<f64> {
    let ind = indicatrix(p, &DVector::zeros(2), k, kind)?;
    Ok(PI / ind.area())
}

/// `√det E[G]`.
pub fn riemannian_volume(p: &MetricPoint) -> f64 {
    p.expected_metric().determinant().max(0.0).sqrt()
}

/// Volumes on a `grid × grid` lattice. All three use the same quadrature, so
/// the pointwise orderings and `ratio = (V_R − V_F)/V_R` carry no
/// discretization bias relative to each other.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeField {
    pub grid: usize,
    pub points: Vec<[f64; 2]>,
    pub v_riemann: Vec<f64>,
    pub v_finsler: Vec<f64>,
    pub v_alpha_sigma: Vec<f64>,
    pub ratio: Vec<f64>,
    /// `1 − (1 − maxᵥ b(ω))^q` at every point.
    pub ratio_bound: Vec<f64>,
    pub posterior_variance: Vec<f64>,
}

impl VolumeField {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = [
            "z1",
            "z2",
            "v_riemann",
            "v_finsler",
            "v_alpha_sigma",
            "ratio",
            "ratio_bound",
            "posterior_variance",
            "log10_v_riemann",
            "log10_v_finsler",
            "log10_v_alpha_sigma",
            "log10_ratio",
        ]
        .map(String::from)
        .to_vec();
        let rows = (0..self.len()).map(|i| {
            vec![
                self.points[i][0],
                self.points[i][1],
                self.v_riemann[i],
                self.v_finsler[i],
                self.v_alpha_sigma[i],
                self.ratio[i],
                self.ratio_bound[i],
                self.posterior_variance[i],
                self.v_riemann[i].log10(),
                self.v_finsler[i].log10(),
                self.v_alpha_sigma[i].log10(),
                self.ratio[i].log10(),
            ]
        });
        write_numeric_csv(path, &header, rows)
    }
}

/// Lattice points spanning `[lo, hi]`, row-major with `z2` varying fastest.
pub fn lattice(lo: &DVector<f64>, hi: &DVector<f64>, grid: usize) -> Vec<[f64; 2]> {
    let last = grid.saturating_sub(1).max(1) as f64;
    (0..grid * grid)
        .map(|k| {
            let (i, j) = ((k / grid) as f64 / last, (k % grid) as f64 / last);
            [lo[0] + i * (hi[0] - lo[0]), lo[1] + j * (hi[1] - lo[1])]
        })
        .collect()
}

/// Volume densities over the map's latent box (or `bounds` when given).
pub fn volume_field<M: LatentMap + ?Sized>(
    map: &M,
    grid: usize,
    k: usize,
    bounds: Option<(DVector<f64>, DVector<f64>)>,
) -> Result<VolumeField> {
    if map.dim_latent() != 2 {
        return Err(Error::Unsupported("volume fields need a 2-D latent space".into()));
    }
    if grid < 2 {
        return Err(Error::Domain("volume grid needs at least 2 points per side".into()));
    }
    let (lo, hi) = bounds
        .or_else(|| map.latent_bounds())
        .ok_or_else(|| Error::Domain("map has no latent bounds; pass them explicitly".into()))?;
    let points = lattice(&lo, &hi, grid);
    type Row = (f64, f64, f64, f64, f64);
    let rows: Vec<Row> = points
        .par_iter()
        .map(|z| {
            let z = DVector::from_row_slice(z);
            let p = map.metric_point(&z);
            let vr = bh_volume(&p, k, MetricKind::Riemannian)?;
            let vf = bh_volume(&p, k, MetricKind::Finsler)?;
            let va = bh_volume(&p, k, MetricKind::AlphaSigma)?;
            Ok((vr, vf, va, p.volume_gap_bound(), map.posterior_variance(&z)))
        })
        .collect::<Result<_>>()?;
    Ok(VolumeField {
        grid,
        v_riemann: rows.iter().map(|r| r.0).collect(),
        v_finsler: rows.iter().map(|r| r.1).collect(),
        v_alpha_sigma: rows.iter().map(|r| r.2).collect(),
        ratio: rows.iter().map(|r| (r.0 - r.1) / r.0).collect(),
        ratio_bound: rows.iter().map(|r| r.3).collect(),
        posterior_variance: rows.iter().map(|r| r.4).collect(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn point(mean: &[f64], d: usize, cov: &[f64]) -> MetricPoint {
        MetricPoint::from_parts(DMatrix::from_row_slice(d, 2, mean), DMatrix::from_row_slice(2, 2, cov)).unwrap()
    }

    #[test]
    fn identity_indicatrix_is_unit_circle() {
        let p = point(&[1.0, 0.0, 0.0, 1.0], 2, &[0.0; 4]);
        for kind in [MetricKind::Euclidean, MetricKind::Riemannian, MetricKind::Finsler] {
            let ind = indicatrix(&p, &DVector::zeros(2), 64, kind).unwrap();
            assert!(ind.radii.iter().all(|r| (r - 1.0).abs() < 1e-14));
            assert!(ind.is_convex());
        }
        assert!((bh_volume(&p, 64, MetricKind::Euclidean).unwrap() - 1.0).abs() < 2e-3);
    }

    #[test]
    fn riemannian_ellipse() {
        // E[G] = diag(4, 1) with zero noise.
        let p = point(&[2.0, 0.0, 0.0, 1.0], 2, &[0.0; 4]);
        let ind = indicatrix(&p, &DVector::zeros(2), 64, MetricKind::Riemannian).unwrap();
        assert!((ind.radii[0] - 0.5).abs() < 1e-15);
        assert!((ind.radii[16] - 1.0).abs() < 1e-15);
        let v = bh_volume(&p, 256, MetricKind::Riemannian).unwrap();
        assert!((v - 2.0).abs() < 0.005 * 2.0);
        assert!((riemannian_volume(&p) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn nesting_and_symmetry() {
        let p = point(&[0.4, -0.1, 0.2, 0.8, -0.5, 0.3], 3, &[0.3, 0.05, 0.05, 0.2]);
        let c = DVector::zeros(2);
        let r = indicatrix(&p, &c, 64, MetricKind::Riemannian).unwrap();
        let f = indicatrix(&p, &c, 64, MetricKind::Finsler).unwrap();
        let a = indicatrix(&p, &c, 64, MetricKind::AlphaSigma).unwrap();
        for i in 0..64 {
            assert!(r.radii[i] <= f.radii[i] && f.radii[i] <= a.radii[i]);
            assert_eq!(f.radii[i], f.radii[(i + 32) % 64]);
        }
        assert!(f.is_convex());
        let (vr, vf, va) = (
            bh_volume(&p, 256, MetricKind::Riemannian).unwrap(),
            bh_volume(&p, 256, MetricKind::Finsler).unwrap(),
            bh_volume(&p, 256, MetricKind::AlphaSigma).unwrap(),
        );
        assert!(va <= vf && vf <= vr);
        assert!((vr - vf) / vr <= p.volume_gap_bound());
    }

    #[test]
    fn rejects_non_planar() {
        let p = MetricPoint::from_parts(DMatrix::identity(3, 3), DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(
            indicatrix(&p, &DVector::zeros(3), 64, MetricKind::Finsler),
            Err(Error::Unsupported(_))
        ));
        assert!(indicatrix(
            &point(&[1.0, 0.0, 0.0, 1.0], 2, &[0.0; 4]),
            &DVector::zeros(2),
            8,
            MetricKind::Finsler
        )
        .is_err());
    }
}
