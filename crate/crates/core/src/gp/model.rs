use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kernel::{Kernel, KernelFamily};
use crate::error::{Error, Result};
use crate::jacobian::JacobianPosterior;

/// First jitter (relative to the kernel variance) tried when `K + noise·I`
/// fails to factorize.
pub const JITTER_START: f64 = 1e-8;
/// Largest relative jitter before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// Gaussian-process regression from `q` latent coordinates to `D` outputs.
///
/// All outputs share the kernel, the noise level and therefore one Cholesky
/// factor; only the right-hand sides differ. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: Kernel,
    noise: f64,
    jitter: f64,
    inputs: Vec<DVector<f64>>,
    outputs: DMatrix<f64>,
    output_means: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    // K⁻¹ (Y − μ), one column per output
    weights: DMatrix<f64>,
}

pub(crate) fn kernel_matrix(kernel: &Kernel, inputs: &[DVector<f64>]) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.variance;
        for j in 0..i {
            let v = kernel.eval(inputs[i].as_slice(), inputs[j].as_slice());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Factorizes `K + noise·I`, escalating a diagonal jitter from
/// `JITTER_START·variance` by factors of ten up to `JITTER_MAX·variance`.
pub(crate) fn factorize(
    kernel_mat: &DMatrix<f64>,
    noise: f64,
    variance: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = kernel_mat.nrows();
    let mut jitter = 0.0;
    loop {
        let mut a = kernel_mat.clone();
        for i in 0..n {
            a[(i, i)] += noise + jitter;
        }
        if let Some(ch) = a.cholesky() {
            if jitter > 0.0 {
                log::debug!("kernel matrix factorized with jitter {jitter:e}");
            }
            return Ok((ch, jitter));
        }
        jitter = if jitter == 0.0 {
            JITTER_START * variance
        } else {
            jitter * 10.0
        };
        if jitter > JITTER_MAX * variance * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite(format!(
                "kernel matrix (noise {noise:e}) even with jitter {:e}",
                JITTER_MAX * variance
            )));
        }
    }
}

fn rows_of(x: &DMatrix<f64>) -> Vec<DVector<f64>> {
    x.row_iter().map(|r| r.transpose()).collect()
}

impl GpModel {
    /// Builds the model from latent inputs `x` (`N × q`) and outputs `y`
    /// (`N × D`), centering each output column at its empirical mean.
    pub fn new(kernel: Kernel, noise: f64, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::Shape(format!(
                "{} latent inputs but {} outputs",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() < 2 || x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::Shape("need N >= 2, q >= 1 and D >= 1".into()));
        }
        if !(noise >= 0.0) || !noise.is_finite() {
            return Err(Error::Domain(format!("noise must be non-negative, got {noise}")));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("training data contains non-finite values".into()));
        }
        let inputs = rows_of(x);
        let output_means = y.row_mean().transpose();
        let k = kernel_matrix(&kernel, &inputs);
        let (chol, jitter) = factorize(&k, noise, kernel.variance)?;
        let centered = Self::center(y, &output_means);
        let weights = chol.solve(&centered);
        Ok(Self {
            kernel,
            noise,
            jitter,
            inputs,
            outputs: y.clone(),
            output_means,
            chol,
            weights,
        })
    }

    fn center(y: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
        let mut c = y.clone();
        for mut row in c.row_iter_mut() {
            row -= means.transpose();
        }
        c
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Diagonal jitter that was needed on top of the noise (usually zero).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n_train(&self) -> usize {
        self.inputs.len()
    }

    pub fn dim_latent(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn dim_data(&self) -> usize {
        self.outputs.ncols()
    }

    pub fn latent_inputs(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_train(), self.dim_latent(), |i, j| self.inputs[i][j])
    }

    pub fn latent_points(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    pub fn output_means(&self) -> &DVector<f64> {
        &self.output_means
    }

    /// Lower-triangular `L` with `LLᵀ = K + (noise + jitter)·I`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Axis-aligned bounding box of the latent inputs, widened by `margin`
    /// times its extent on every side.
    pub fn latent_bounding_box(&self, margin: f64) -> (DVector<f64>, DVector<f64>) {
        let q = self.dim_latent();
        let mut lo = DVector::from_element(q, f64::INFINITY);
        let mut hi = DVector::from_element(q, f64::NEG_INFINITY);
        for p in &self.inputs {
            for j in 0..q {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        let pad = (&hi - &lo) * margin;
        (lo - &pad, hi + pad)
    }

    fn cross_kernel(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n_train(),
            self.inputs
                .iter()
                .map(|x| self.kernel.eval(z.as_slice(), x.as_slice())),
        )
    }

    /// Predictive mean of all `D` outputs and the shared predictive variance
    /// of the latent function (noise excluded).
    pub fn posterior_mean_var(&self, z: &DVector<f64>) -> (DVector<f64>, f64) {
        let kstar = self.cross_kernel(z);
        let mean = &self.output_means + self.weights.tr_mul(&kstar);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor has a non-zero diagonal");
        let var = (self.kernel.variance - v.norm_squared()).max(0.0);
        (mean, var)
    }

    /// Joint predictive distribution at several points: an `P × D` mean
    /// matrix and the shared `P × P` covariance.
    pub fn joint_posterior(&self, points: &[DVector<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = points.len();
        let kstar = DMatrix::from_fn(self.n_train(), p, |i, j| {
            self.kernel.eval(self.inputs[i].as_slice(), points[j].as_slice())
        });
        let mut mean = kstar.tr_mul(&self.weights);
        for mut row in mean.row_iter_mut() {
            row += self.output_means.transpose();
        }
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor has a non-zero diagonal");
        let prior = kernel_matrix(&self.kernel, points);
        let cov = prior - v.tr_mul(&v);
        (mean, cov)
    }

    /// Posterior of the Jacobian from the derivative process:
    /// `E[J]ᵀ = ∂K(z, X) K⁻¹ (Y − μ)` and
    /// `Σ = ∂²K(z, z) − ∂K(z, X) K⁻¹ ∂K(X, z)`.
    pub fn jacobian_posterior_closed_form(&self, z: &DVector<f64>) -> JacobianPosterior {
        let n = self.n_train();
        let q = self.dim_latent();
        let mut dk = DMatrix::<f64>::zeros(n, q);
        let mut buf = vec![0.0; q];
        for (i, x) in self.inputs.iter().enumerate() {
            self.kernel.grad_first_into(z.as_slice(), x.as_slice(), &mut buf);
            for j in 0..q {
                dk[(i, j)] = buf[j];
            }
        }
        let mean = self.weights.tr_mul(&dk);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&dk)
            .expect("Cholesky factor has a non-zero diagonal");
        let prior = DMatrix::identity(q, q) * self.kernel.prior_derivative_variance();
        let cov = prior - v.tr_mul(&v);
        JacobianPosterior::new(mean, cov).expect("finite model yields a finite Jacobian posterior")
    }

    /// Whether `h` is too coarse for finite differences at this lengthscale.
    pub fn step_too_large(&self, h: f64) -> bool {
        h > self.kernel.lengthscale / 10.0
    }

    /// Jacobian posterior from central differences of the joint predictive
    /// distribution at `z ± (h/2)·eⱼ`.
    pub fn jacobian_posterior_discretized(&self, z: &DVector<f64>, h: f64) -> Result<JacobianPosterior> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
        }
        if self.step_too_large(h) {
            log::warn!(
                "finite-difference step {h} exceeds a tenth of the lengthscale {}",
                self.kernel.lengthscale
            );
        }
        let q = self.dim_latent();
        let mut points = Vec::with_capacity(2 * q);
        for j in 0..q {
            let mut plus = z.clone();
            let mut minus = z.clone();
            plus[j] += 0.5 * h;
            minus[j] -= 0.5 * h;
            points.push(plus);
            points.push(minus);
        }
        let (mean, cov) = self.joint_posterior(&points);
        let jac_mean = DMatrix::from_fn(self.dim_data(), q, |d, j| {
            (mean[(2 * j, d)] - mean[(2 * j + 1, d)]) / h
        });
        let jac_cov = DMatrix::from_fn(q, q, |i, j| {
            let (ip, im, jp, jm) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            (cov[(ip, jp)] - cov[(ip, jm)] - cov[(im, jp)] + cov[(im, jm)]) / (h * h)
        });
        JacobianPosterior::new(jac_mean, jac_cov)
    }

    /// Log marginal likelihood of the centered outputs, summed over the `D`
    /// independent output dimensions.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let centered = Self::center(&self.outputs, &self.output_means);
        let n = self.n_train() as f64;
        let d = self.dim_data() as f64;
        let data_fit = centered.component_mul(&self.weights).sum();
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        -0.5 * data_fit - 0.5 * d * log_det - 0.5 * n * d * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            kernel: self.kernel.family,
            lengthscale: self.kernel.lengthscale,
            variance: self.kernel.variance,
            noise: self.noise,
            latent_inputs: self.inputs.iter().map(|p| p.iter().copied().collect()).collect(),
            outputs: self.outputs.row_iter().map(|r| r.iter().copied().collect()).collect(),
            output_means: self.output_means.iter().copied().collect(),
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        let x = matrix_from_rows(&file.latent_inputs, "latent_inputs")?;
        let y = matrix_from_rows(&file.outputs, "outputs")?;
        let kernel = Kernel::new(file.kernel, file.lengthscale, file.variance)?;
        let model = Self::new(kernel, file.noise, &x, &y)?;
        if file.output_means.len() != model.dim_data() {
            return Err(Error::Shape(format!(
                "{} output means for {} outputs",
                file.output_means.len(),
                model.dim_data()
            )));
        }
        let means = DVector::from_column_slice(&file.output_means);
        if (&means - &model.output_means).amax() > 1e-9 * means.amax().max(1.0) {
            log::warn!("stored output means differ from the column means of the stored outputs");
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk form of a [`GpModel`]; matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kernel: KernelFamily,
    pub lengthscale: f64,
    pub variance: f64,
    pub noise: f64,
    pub latent_inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub output_means: Vec<f64>,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Shape(format!(
            "{what}: row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
