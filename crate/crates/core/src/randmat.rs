//! Monte-Carlo oracle for the stochastic pullback metric.
//!
//! A Jacobian `J` with independent Gaussian rows `N(E[J]ᵢ, Σ)` induces the
//! non-central Wishart matrix `G = JᵀJ`; for a fixed direction `v` the scalar
//! `vᵀGv` is a one-dimensional non-central Wishart variable and `√(vᵀGv)` is
//! non-central Nakagami. Everything here is sampling-based and seeded so that
//! the closed forms elsewhere in the crate can be checked against it.
//!
//! Seeds for independent batches are derived with [`derive_seed`]: the
//! SplitMix64 finalizer applied to `seed ⊕ mix(index)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jacobian::JacobianPosterior;

/// Regularization added to a covariance whose Cholesky factorization fails.
pub const COV_REGULARIZATION: f64 = 1e-12;

const BATCH_SIZE: usize = 1 << 15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th independent stream derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Distribution of a `D × q` Jacobian with independent rows `N(E[J]ᵢ, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartSpec {
    pub dof: usize,
    pub scale: DMatrix<f64>,
    pub mean_jacobian: DMatrix<f64>,
}

impl WishartSpec {
    pub fn new(mean_jacobian: DMatrix<f64>, scale: DMatrix<f64>) -> Result<Self> {
        let q = mean_jacobian.ncols();
        if mean_jacobian.nrows() == 0 || q == 0 {
            return Err(Error::Shape("mean Jacobian must be non-empty".into()));
        }
        if scale.shape() != (q, q) {
            return Err(Error::Shape(format!(
                "scale is {:?}, expected ({q}, {q})",
                scale.shape()
            )));
        }
        let asym = (&scale - scale.transpose()).amax();
        if asym > 1e-12 * scale.amax().max(1.0) {
            return Err(Error::Domain(format!("scale matrix is not symmetric ({asym:e})")));
        }
        Ok(Self {
            dof: mean_jacobian.nrows(),
            scale,
            mean_jacobian,
        })
    }

    pub fn dim_latent(&self) -> usize {
        self.mean_jacobian.ncols()
    }

    /// `E[G] = E[J]ᵀE[J] + D·Σ`.
    pub fn expected_metric(&self) -> DMatrix<f64> {
        self.mean_jacobian.transpose() * &self.mean_jacobian + &self.scale * self.dof as f64
    }

    /// The scalar Wishart law of `vᵀGv`.
    pub fn scalar(&self, v: &DVector<f64>) -> Result<ScalarWishart> {
        let sigma = v.dot(&(&self.scale * v));
        let signal = (&self.mean_jacobian * v).norm_squared();
        ScalarWishart::new(self.dof, sigma, signal / sigma)
    }
}

impl From<&JacobianPosterior> for WishartSpec {
    fn from(jac: &JacobianPosterior) -> Self {
        Self {
            dof: jac.dim_data,
            scale: jac.cov.clone(),
            mean_jacobian: jac.mean.clone(),
        }
    }
}

/// `W₁(D, σ, ω)`: law of `vᵀGv` with `σ = vᵀΣv` and non-centrality `ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarWishart {
    pub dof: usize,
    pub sigma: f64,
    pub omega: f64,
}

impl ScalarWishart {
    pub fn new(dof: usize, sigma: f64, omega: f64) -> Result<Self> {
        if dof == 0 || !(sigma > 0.0) || !(omega >= 0.0) || !sigma.is_finite() || !omega.is_finite() {
            return Err(Error::Domain(format!(
                "invalid scalar Wishart (D={dof}, sigma={sigma}, omega={omega})"
            )));
        }
        Ok(Self { dof, sigma, omega })
    }

    /// One draw: `σ · [(ξ₁ + √ω)² + Σᵢ₌₂ᴰ ξᵢ²]`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let shift = self.omega.sqrt();
        let first: f64 = StandardNormal.sample(rng);
        let rest: f64 = (1..self.dof)
            .map(|_| {
                let x: f64 = StandardNormal.sample(rng);
                x * x
            })
            .sum();
        self.sigma * ((first + shift).powi(2) + rest)
    }
}

/// `(E[z], E[z²])` for `z ∼ W₁(D, σ, ω)`:
/// `σ(D + ω)` and `σ²(2ω + 2(D + ω) + (D + ω)²)`.
pub fn wishart_scalar_moments(s: &ScalarWishart) -> (f64, f64) {
    let d = s.dof as f64;
    let t = d + s.omega;
    let mean = s.sigma * t;
    let second = s.sigma * s.sigma * (2.0 * s.omega + 2.0 * t + t * t);
    (mean, second)
}

/// Lower Cholesky factor of `Σ`, regularized by `COV_REGULARIZATION · I` when
/// the plain factorization fails.
pub fn covariance_factor(scale: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = scale.clone().cholesky() {
        return Ok(ch.l());
    }
    let q = scale.nrows();
    let reg = scale + DMatrix::identity(q, q) * COV_REGULARIZATION;
    reg.cholesky()
        .map(|ch| ch.l())
        .ok_or_else(|| Error::NotPositiveDefinite("Jacobian covariance".into()))
}

/// Reusable sampler for full Jacobian draws.
#[derive(Debug, Clone)]
pub struct JacobianSampler {
    mean: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl JacobianSampler {
    pub fn new(spec: &WishartSpec) -> Result<Self> {
        Ok(Self {
            mean: spec.mean_jacobian.clone(),
            factor: covariance_factor(&spec.scale)?,
        })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let (d, q) = self.mean.shape();
        let noise = DMatrix::<f64>::from_fn(d, q, |_, _| StandardNormal.sample(rng));
        // row i gets L εᵢ, i.e. the noise matrix times Lᵀ
        &self.mean + noise * self.factor.transpose()
    }
}

/// One Jacobian draw with independent rows `N(E[J]ᵢ, Σ)`.
pub fn sample_jacobian(spec: &WishartSpec, rng_seed: u64) -> Result<DMatrix<f64>> {
    let sampler = JacobianSampler::new(spec)?;
    Ok(sampler.sample(&mut rng_from_seed(rng_seed)))
}

/// Sample moments of `√(vᵀGv)` and of `vᵀGv` with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSampleStats {
    pub n: usize,
    pub norm_mean: f64,
    pub norm_mean_se: f64,
    pub norm_var: f64,
    pub norm_var_se: f64,
    pub sq_mean: f64,
    pub sq_mean_se: f64,
    pub sq_var: f64,
    pub sq_var_se: f64,
}

/// Mean, its standard error, variance and the standard error of the variance
/// (from the fourth central moment).
fn moment_summary(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(m2, m4), &x| {
        let d = x - mean;
        let d2 = d * d;
        (m2 + d2, m4 + d2 * d2)
    });
    let var = m2 / (n - 1.0);
    let m4 = m4 / n;
    let pop_var = m2 / n;
    let var_se = ((m4 - pop_var * pop_var).max(0.0) / n).sqrt();
    (mean, (var / n).sqrt(), var, var_se)
}

fn check_direction(v: &DVector<f64>, n_samples: usize) -> Result<()> {
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::Domain("tangent vector must be non-zero".into()));
    }
    if n_samples < 100 {
        return Err(Error::Domain(format!("need at least 100 samples, got {n_samples}")));
    }
    Ok(())
}

/// Draws `n_samples` values of `vᵀGv`.
///
/// Only the action `Jv` is needed, and its entries are independent
/// `N((E[J]v)ᵢ, vᵀΣv)`, so each draw costs `D` normals instead of `D·q`.
/// Batches of `2¹⁵` draws use seeds `derive_seed(seed, batch)`.
pub fn sample_quadratic_forms(
    spec: &WishartSpec,
    v: &DVector<f64>,
    n_samples: usize,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    check_direction(v, n_samples)?;
    let center = &spec.mean_jacobian * v;
    let spread = v.dot(&(&spec.scale * v)).max(0.0).sqrt();
    let batches = n_samples.div_ceil(BATCH_SIZE);
    let chunks: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_from_seed(derive_seed(rng_seed, b as u64));
            let len = BATCH_SIZE.min(n_samples - b * BATCH_SIZE);
            (0..len)
                .map(|_| {
                    center
                        .iter()
                        .map(|&m| {
                            let xi: f64 = StandardNormal.sample(&mut rng);
                            let x = m + spread * xi;
                            x * x
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(chunks.concat())
}

pub fn norm_sample_stats(
    spec: &WishartSpec,
    v: &DVector<f64>,
    n_samples: usize,
    rng_seed: u64,
) -> Result<NormSampleStats> {
    let squares = sample_quadratic_forms(spec, v, n_samples, rng_seed)?;
    let norms: Vec<f64> = squares.iter().map(|z| z.sqrt()).collect();
    let (norm_mean, norm_mean_se, norm_var, norm_var_se) = moment_summary(&norms);
    let (sq_mean, sq_mean_se, sq_var, sq_var_se) = moment_summary(&squares);
    Ok(NormSampleStats {
        n: n_samples,
        norm_mean,
        norm_mean_se,
        norm_var,
        norm_var_se,
        sq_mean,
        sq_mean_se,
        sq_var,
        sq_var_se,
    })
}

/// Monte-Carlo estimate of `E[√(vᵀJᵀJv)]` and its standard error.
pub fn expected_norm_mc(
    spec: &WishartSpec,
    v: &DVector<f64>,
    n_samples: usize,
    rng_seed: u64,
) -> Result<(f64, f64)> {
    let stats = norm_sample_stats(spec, v, n_samples, rng_seed)?;
    Ok((stats.norm_mean, stats.norm_mean_se))
}

/// Entrywise mean and standard error of `n` sampled metric tensors `G = JᵀJ`.
pub fn metric_tensor_mc(
    spec: &WishartSpec,
    n_samples: usize,
    rng_seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sampler = JacobianSampler::new(spec)?;
    let q = spec.dim_latent();
    let mut rng = rng_from_seed(rng_seed);
    let mut sum = DMatrix::<f64>::zeros(q, q);
    let mut sum_sq = DMatrix::<f64>::zeros(q, q);
    for _ in 0..n_samples {
        let j = sampler.sample(&mut rng);
        let g = j.transpose() * j;
        sum_sq += g.component_mul(&g);
        sum += g;
    }
    let n = n_samples as f64;
    let mean = &sum / n;
    let se = (sum_sq / n - mean.component_mul(&mean)).map(|v| (v.max(0.0) / (n - 1.0)).sqrt());
    Ok((mean, se))
}
