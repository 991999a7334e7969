use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern52,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::SquaredExponential => f.write_str("rbf"),
            KernelFamily::Matern52 => f.write_str("matern52"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" | "se" | "squared_exponential" => Ok(KernelFamily::SquaredExponential),
            "matern52" | "matern" => Ok(KernelFamily::Matern52),
            other => Err(Error::Domain(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// Stationary isotropic covariance with one lengthscale and one variance.
///
/// All derivative helpers are written in terms of the offset `τ = z₁ − z₂`:
/// `Cov(∂f(z₁), f(z₂)) = ∂k/∂τ` and `Cov(∂f(z₁), ∂f(z₂)) = −∂²k/∂τ∂τᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: KernelFamily,
    pub lengthscale: f64,
    pub variance: f64,
}

fn offset<'a>(z1: &'a [f64], z2: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    z1.iter().zip(z2).map(|(a, b)| a - b)
}

fn sq_dist(z1: &[f64], z2: &[f64]) -> f64 {
    offset(z1, z2).map(|d| d * d).sum()
}

impl Kernel {
    pub fn new(family: KernelFamily, lengthscale: f64, variance: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) || !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel hyperparameters must be positive (lengthscale={lengthscale}, variance={variance})"
            )));
        }
        Ok(Self {
            family,
            lengthscale,
            variance,
        })
    }

    pub fn rbf(lengthscale: f64, variance: f64) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, lengthscale, variance)
    }

    pub fn matern52(lengthscale: f64, variance: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern52, lengthscale, variance)
    }

    /// `k(r)` as a function of the squared distance.
    pub fn eval_sq_dist(&self, r2: f64) -> f64 {
        let l2 = self.lengthscale * self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => self.variance * (-0.5 * r2 / l2).exp(),
            KernelFamily::Matern52 => {
                let u = SQRT5 * r2.sqrt() / self.lengthscale;
                self.variance * (1.0 + u + u * u / 3.0) * (-u).exp()
            }
        }
    }

    pub fn eval(&self, z1: &[f64], z2: &[f64]) -> f64 {
        self.eval_sq_dist(sq_dist(z1, z2))
    }

    /// `s(r²)` with `∂k/∂τᵢ = s · τᵢ`.
    fn radial_slope(&self, r2: f64) -> f64 {
        let l2 = self.lengthscale * self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => -self.eval_sq_dist(r2) / l2,
            KernelFamily::Matern52 => {
                let u = SQRT5 * r2.sqrt() / self.lengthscale;
                -5.0 * self.variance / (3.0 * l2) * (1.0 + u) * (-u).exp()
            }
        }
    }

    /// Gradient of `k(z₁, z₂)` with respect to `z₁`.
    pub fn grad_first(&self, z1: &[f64], z2: &[f64]) -> DVector<f64> {
        let slope = self.radial_slope(sq_dist(z1, z2));
        DVector::from_iterator(z1.len(), offset(z1, z2).map(|t| slope * t))
    }

    /// `∂²k(z₁, z₂) / ∂z₁ ∂z₂ᵀ`, the covariance between gradients at the two
    /// points.
    pub fn cross_hessian(&self, z1: &[f64], z2: &[f64]) -> DMatrix<f64> {
        let tau: Vec<f64> = offset(z1, z2).collect();
        let q = tau.len();
        let r2: f64 = tau.iter().map(|t| t * t).sum();
        let l2 = self.lengthscale * self.lengthscale;
        let (diag, outer) = match self.family {
            KernelFamily::SquaredExponential => {
                let k = self.eval_sq_dist(r2);
                (k / l2, -k / (l2 * l2))
            }
            KernelFamily::Matern52 => {
                let u = SQRT5 * r2.sqrt() / self.lengthscale;
                let e = (-u).exp();
                let c = 5.0 * self.variance / (3.0 * l2);
                (c * (1.0 + u) * e, -c * 5.0 / l2 * e)
            }
        };
        DMatrix::from_fn(q, q, |i, j| {
            let d = if i == j { diag } else { 0.0 };
            d + outer * tau[i] * tau[j]
        })
    }

    /// Prior variance of each partial derivative, `−∂²k/∂τᵢ² at τ = 0`.
    pub fn prior_derivative_variance(&self) -> f64 {
        let l2 = self.lengthscale * self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => self.variance / l2,
            KernelFamily::Matern52 => 5.0 * self.variance / (3.0 * l2),
        }
    }

    /// `∂k / ∂ ln ℓ` at squared distance `r2`.
    pub fn dlog_lengthscale(&self, r2: f64) -> f64 {
        let l2 = self.lengthscale * self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => self.eval_sq_dist(r2) * r2 / l2,
            KernelFamily::Matern52 => {
                let u = SQRT5 * r2.sqrt() / self.lengthscale;
                self.variance / 3.0 * u * u * (1.0 + u) * (-u).exp()
            }
        }
    }

    /// `∂k(z₁, z₂)/∂z₁` written into `out`.
    pub(crate) fn grad_first_into(&self, z1: &[f64], z2: &[f64], out: &mut [f64]) {
        let slope = self.radial_slope(sq_dist(z1, z2));
        for (o, t) in out.iter_mut().zip(offset(z1, z2)) {
            *o = slope * t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernels() -> Vec<Kernel> {
        vec![
            Kernel::rbf(0.7, 1.3).unwrap(),
            Kernel::matern52(0.9, 0.6).unwrap(),
            Kernel::rbf(2.5, 0.2).unwrap(),
            Kernel::matern52(0.3, 2.0).unwrap(),
        ]
    }

    #[test]
    fn trivial_values() {
        let se = Kernel::rbf(1.0, 1.0).unwrap();
        assert_eq!(se.eval(&[0.3, 0.2], &[0.3, 0.2]), 1.0);
        assert!((se.eval(&[0.0, 0.0], &[1.0, 0.0]) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((se.eval(&[0.0, 0.0], &[1.0, 0.0]) - 0.606_53).abs() < 1e-5);
        let m = Kernel::matern52(1.0, 1.0).unwrap();
        let expected = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        assert!((m.eval(&[0.0], &[1.0]) - expected).abs() < 1e-15);
        assert!((m.eval(&[0.0], &[1.0]) - 0.523_99).abs() < 1e-5);
    }

    #[test]
    fn rejects_non_positive_hyperparameters() {
        assert!(Kernel::rbf(0.0, 1.0).is_err());
        assert!(Kernel::matern52(1.0, -1.0).is_err());
        assert!("cosine".parse::<KernelFamily>().is_err());
        assert_eq!("matern52".parse::<KernelFamily>().unwrap(), KernelFamily::Matern52);
    }

    #[test]
    fn symmetric_in_arguments() {
        for k in kernels() {
            let a = [0.1, -0.4, 0.8];
            let b = [1.1, 0.3, -0.2];
            assert_eq!(k.eval(&a, &b), k.eval(&b, &a));
        }
    }

    #[test]
    fn gradient_matches_central_difference() {
        let h = 1e-6;
        for k in kernels() {
            let z1 = [0.3, -0.2];
            let z2 = [-0.1, 0.5];
            let g = k.grad_first(&z1, &z2);
            for i in 0..2 {
                let mut p = z1;
                let mut m = z1;
                p[i] += h;
                m[i] -= h;
                let fd = (k.eval(&p, &z2) - k.eval(&m, &z2)) / (2.0 * h);
                assert!((g[i] - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "{k:?} i={i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn cross_hessian_matches_central_difference() {
        let h = 1e-6;
        for k in kernels() {
            let z1 = [0.3, -0.2];
            let z2 = [-0.1, 0.15];
            let hess = k.cross_hessian(&z1, &z2);
            for j in 0..2 {
                // differentiate the analytic first-argument gradient in z₂
                let mut p = z2;
                let mut m = z2;
                p[j] += h;
                m[j] -= h;
                let fd = (k.grad_first(&z1, &p) - k.grad_first(&z1, &m)) / (2.0 * h);
                for i in 0..2 {
                    assert!(
                        (hess[(i, j)] - fd[i]).abs() <= 1e-5 * fd[i].abs().max(1e-3),
                        "{k:?} ({i},{j}): {} vs {}",
                        hess[(i, j)],
                        fd[i]
                    );
                }
            }
        }
    }

    #[test]
    fn cross_hessian_at_zero_offset_is_prior_derivative_variance() {
        for k in kernels() {
            let z = [0.4, 0.1];
            let h = k.cross_hessian(&z, &z);
            let expected = DMatrix::identity(2, 2) * k.prior_derivative_variance();
            assert!((h - expected).amax() < 1e-14);
        }
    }

    #[test]
    fn lengthscale_derivative_matches_central_difference() {
        for k in kernels() {
            let r2 = 0.37;
            let eps: f64 = 1e-6;
            let up = Kernel::new(k.family, k.lengthscale * eps.exp(), k.variance).unwrap();
            let down = Kernel::new(k.family, k.lengthscale * (-eps).exp(), k.variance).unwrap();
            let fd = (up.eval_sq_dist(r2) - down.eval_sq_dist(r2)) / (2.0 * eps);
            assert!((k.dlog_lengthscale(r2) - fd).abs() < 1e-5 * fd.abs());
        }
    }
}
