use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::gp::GpModel;
use crate::jacobian::JacobianPosterior;
use crate::metric::MetricPoint;

/// A (possibly stochastic) decoder from latent space to data space, seen
/// through the Gaussian posterior of its Jacobian.
pub trait LatentMap: Sync {
    fn dim_latent(&self) -> usize;

    fn dim_data(&self) -> usize;

    fn jacobian_posterior(&self, z: &DVector<f64>) -> JacobianPosterior;

    /// Predictive variance of each output coordinate at `z`.
    fn posterior_variance(&self, _z: &DVector<f64>) -> f64 {
        0.0
    }

    fn decode_mean(&self, z: &DVector<f64>) -> DVector<f64>;

    /// Region of latent space where the map is trusted, if it has one.
    fn latent_bounds(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        None
    }

    fn metric_point(&self, z: &DVector<f64>) -> MetricPoint {
        MetricPoint::new(self.jacobian_posterior(z))
    }
}

impl LatentMap for GpModel {
    fn dim_latent(&self) -> usize {
        GpModel::dim_latent(self)
    }

    fn dim_data(&self) -> usize {
        GpModel::dim_data(self)
    }

    fn jacobian_posterior(&self, z: &DVector<f64>) -> JacobianPosterior {
        self.jacobian_posterior_closed_form(z)
    }

    fn posterior_variance(&self, z: &DVector<f64>) -> f64 {
        self.posterior_mean_var(z).1
    }

    fn decode_mean(&self, z: &DVector<f64>) -> DVector<f64> {
        self.posterior_mean_var(z).0
    }

    fn latent_bounds(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        Some(self.latent_bounding_box(0.1))
    }
}

/// `f(z) = E[J] z` with the same Jacobian posterior everywhere.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub jac: JacobianPosterior,
}

impl AffineMap {
    pub fn new(mean: DMatrix<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            jac: JacobianPosterior::new(mean, cov)?,
        })
    }

    /// The identity map on `R^q`: its pullback metric is Euclidean.
    pub fn identity(q: usize) -> Self {
        Self {
            jac: JacobianPosterior::deterministic(DMatrix::identity(q, q)).expect("valid identity"),
        }
    }
}

impl LatentMap for AffineMap {
    fn dim_latent(&self) -> usize {
        self.jac.dim_latent()
    }

    fn dim_data(&self) -> usize {
        self.jac.dim_data
    }

    fn jacobian_posterior(&self, _z: &DVector<f64>) -> JacobianPosterior {
        self.jac.clone()
    }

    fn posterior_variance(&self, _z: &DVector<f64>) -> f64 {
        self.jac.cov.trace() / self.jac.dim_latent() as f64
    }

    fn decode_mean(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.jac.mean * z
    }
}

/// The unit sphere in spherical coordinates `z = (θ, φ)`:
/// `f(θ, φ) = (cos θ sin φ, sin θ sin φ, cos φ)`.
///
/// `jacobian_variance` adds isotropic noise `s·I` to the Jacobian posterior;
/// zero gives the deterministic sphere.
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereMap {
    pub jacobian_variance: f64,
}

impl SphereMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Great-circle distance between the images of two latent points.
    pub fn great_circle_distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let fa = self.decode_mean(a);
        let fb = self.decode_mean(b);
        fa.dot(&fb).clamp(-1.0, 1.0).acos()
    }
}

impl LatentMap for SphereMap {
    fn dim_latent(&self) -> usize {
        2
    }

    fn dim_data(&self) -> usize {
        3
    }

    fn jacobian_posterior(&self, z: &DVector<f64>) -> JacobianPosterior {
        let (st, ct) = z[0].sin_cos();
        let (sp, cp) = z[1].sin_cos();
        #[rustfmt::skip]
        let mean = DMatrix::from_row_slice(3, 2, &[
            -st * sp, ct * cp,
            ct * sp, st * cp,
            0.0, -sp,
        ]);
        JacobianPosterior::new(mean, DMatrix::identity(2, 2) * self.jacobian_variance).expect("finite sphere Jacobian")
    }

    fn posterior_variance(&self, _z: &DVector<f64>) -> f64 {
        self.jacobian_variance
    }

    fn decode_mean(&self, z: &DVector<f64>) -> DVector<f64> {
        let (st, ct) = z[0].sin_cos();
        let (sp, cp) = z[1].sin_cos();
        DVector::from_vec(vec![ct * sp, st * sp, cp])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_jacobian_matches_central_difference() {
        let s = SphereMap::new();
        let z = DVector::from_vec(vec![0.7, 1.1]);
        let j = s.jacobian_posterior(&z).mean;
        let h = 1e-6;
        for c in 0..2 {
            let mut a = z.clone();
            let mut b = z.clone();
            a[c] += h;
            b[c] -= h;
            let fd = (s.decode_mean(&a) - s.decode_mean(&b)) / (2.0 * h);
            assert!((j.column(c) - fd).amax() < 1e-9);
        }
        assert!((s.decode_mean(&z).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_map_is_euclidean() {
        let m = AffineMap::identity(3);
        let p = m.metric_point(&DVector::zeros(3));
        let v = DVector::from_vec(vec![1.0, -2.0, 2.0]);
        assert!((p.finsler_norm(&v).unwrap() - 3.0).abs() < 1e-15);
        assert!((p.riemannian_norm(&v) - 3.0).abs() < 1e-15);
    }
}
