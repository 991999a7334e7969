use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::kernel::Kernel;
use super::model::{factorize, kernel_matrix, GpModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub steps: usize,
    pub learning_rate: f64,
    /// Also move the latent inputs (MAP with a standard normal prior).
    pub optimize_latents: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            steps: 200,
            learning_rate: 0.05,
            optimize_latents: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: GpModel,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Step at which the returned parameters were found (0 = initial).
    pub best_step: usize,
}

/// Principal-component coordinates of the rows of `y`, scaled so the first
/// component has unit standard deviation.
pub fn pca_latents(y: &DMatrix<f64>, q: usize) -> Result<DMatrix<f64>> {
    let (n, d) = y.shape();
    if q == 0 || q > d || n < 2 {
        return Err(Error::Shape(format!("cannot project {n}x{d} data onto {q} components")));
    }
    let mean = y.row_mean();
    let mut centered = y.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = DMatrix::zeros(d, q);
    for (k, &idx) in order.iter().take(q).enumerate() {
        let mut col = eig.eigenvectors.column(idx).clone_owned();
        // deterministic sign: largest loading positive
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        basis.set_column(k, &col);
    }
    let scores = centered * basis;
    let first = scores.column(0);
    let std = (first.norm_squared() / (n as f64 - 1.0)).sqrt();
    Ok(if std > 0.0 { scores / std } else { scores })
}

struct Params {
    log_lengthscale: f64,
    log_variance: f64,
    log_noise: Option<f64>,
    latents: DMatrix<f64>,
}

impl Params {
    fn kernel(&self, family: super::KernelFamily) -> Result<Kernel> {
        Kernel::new(family, self.log_lengthscale.exp(), self.log_variance.exp())
    }

    fn noise(&self) -> f64 {
        self.log_noise.map_or(0.0, f64::exp)
    }
}

struct Evaluation {
    objective: f64,
    grad_hyper: [f64; 3],
    grad_latents: Option<DMatrix<f64>>,
}

fn evaluate(
    params: &Params,
    family: super::KernelFamily,
    centered: &DMatrix<f64>,
    with_latents: bool,
) -> Result<Evaluation> {
    let kernel = params.kernel(family)?;
    let noise = params.noise();
    let inputs: Vec<DVector<f64>> = params.latents.row_iter().map(|r| r.transpose()).collect();
    let n = inputs.len();
    let d = centered.ncols() as f64;
    let kf = kernel_matrix(&kernel, &inputs);
    let (chol, _) = factorize(&kf, noise, kernel.variance)?;
    let alpha = chol.solve(centered);
    let kinv = chol.inverse();
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let mut objective = -0.5 * centered.component_mul(&alpha).sum() - 0.5 * d * log_det
        - 0.5 * n as f64 * d * (2.0 * std::f64::consts::PI).ln();

    // dLML/dθ = ½ tr(W ∂K/∂θ) with W = ααᵀ − D K⁻¹
    let w = &alpha * alpha.transpose() - kinv * d;
    let mut g_len = 0.0;
    for i in 0..n {
        for j in 0..n {
            let r2 = (&inputs[i] - &inputs[j]).norm_squared();
            g_len += w[(i, j)] * kernel.dlog_lengthscale(r2);
        }
    }
    let g_var = w.component_mul(&kf).sum();
    let g_noise = if params.log_noise.is_some() {
        0.5 * noise * w.trace()
    } else {
        0.0
    };

    let grad_latents = if with_latents {
        let q = params.latents.ncols();
        let mut g = -params.latents.clone();
        objective -= 0.5 * params.latents.norm_squared();
        let mut buf = vec![0.0; q];
        for i in 0..n {
            for m in 0..n {
                if m == i {
                    continue;
                }
                kernel.grad_first_into(inputs[i].as_slice(), inputs[m].as_slice(), &mut buf);
                for j in 0..q {
                    g[(i, j)] += w[(i, m)] * buf[j];
                }
            }
        }
        Some(g)
    } else {
        None
    };

    Ok(Evaluation {
        objective,
        grad_hyper: [0.5 * g_len, 0.5 * g_var, g_noise],
        grad_latents,
    })
}

/// Maximizes the log marginal likelihood over `ln ℓ`, `ln σ²` and `ln noise`
/// with Adam, keeping the latent inputs fixed.
pub fn fit_hyperparameters(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    k0: Kernel,
    noise0: f64,
    steps: usize,
    lr: f64,
) -> Result<GpModel> {
    let opts = FitOptions {
        steps,
        learning_rate: lr,
        optimize_latents: false,
    };
    fit(x, y, k0, noise0, &opts).map(|r| r.model)
}

/// Adam ascent on the log marginal likelihood (plus the latent prior when
/// latents are optimized). The best parameters seen are returned, so the
/// objective never ends below its initial value.
pub fn fit(x: &DMatrix<f64>, y: &DMatrix<f64>, k0: Kernel, noise0: f64, opts: &FitOptions) -> Result<FitReport> {
    let initial = GpModel::new(k0, noise0, x, y)?;
    let centered = {
        let mut c = y.clone();
        for mut row in c.row_iter_mut() {
            row -= initial.output_means().transpose();
        }
        c
    };
    let mut params = Params {
        log_lengthscale: k0.lengthscale.ln(),
        log_variance: k0.variance.ln(),
        log_noise: (noise0 > 0.0).then(|| noise0.ln()),
        latents: x.clone(),
    };
    let first = evaluate(&params, k0.family, &centered, opts.optimize_latents)?;
    let initial_objective = first.objective;
    if opts.steps == 0 {
        return Ok(FitReport {
            model: initial,
            initial_objective,
            final_objective: initial_objective,
            best_step: 0,
        });
    }

    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    const MIN_LOG_NOISE: f64 = -18.42; // ln 1e-8

    let mut m_h = [0.0; 3];
    let mut v_h = [0.0; 3];
    let mut m_x = DMatrix::<f64>::zeros(x.nrows(), x.ncols());
    let mut v_x = DMatrix::<f64>::zeros(x.nrows(), x.ncols());
    let mut best = (initial_objective, 0usize, params.log_lengthscale, params.log_variance, params.log_noise, x.clone());
    let mut eval = first;

    for step in 1..=opts.steps {
        let t = step as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        let mut update = [0.0; 3];
        for k in 0..3 {
            let g = eval.grad_hyper[k];
            m_h[k] = BETA1 * m_h[k] + (1.0 - BETA1) * g;
            v_h[k] = BETA2 * v_h[k] + (1.0 - BETA2) * g * g;
            update[k] = opts.learning_rate * (m_h[k] / bc1) / ((v_h[k] / bc2).sqrt() + EPS);
        }
        params.log_lengthscale += update[0];
        params.log_variance += update[1];
        if let Some(ln) = params.log_noise.as_mut() {
            *ln = (*ln + update[2]).max(MIN_LOG_NOISE);
        }
        if let Some(g) = &eval.grad_latents {
            m_x = &m_x * BETA1 + g * (1.0 - BETA1);
            v_x = &v_x * BETA2 + g.component_mul(g) * (1.0 - BETA2);
            let step_x = (&m_x / bc1).zip_map(&(&v_x / bc2), |m, v| opts.learning_rate * m / (v.sqrt() + EPS));
            params.latents += step_x;
        }
        eval = evaluate(&params, k0.family, &centered, opts.optimize_latents)?;
        if eval.objective > best.0 {
            best = (
                eval.objective,
                step,
                params.log_lengthscale,
                params.log_variance,
                params.log_noise,
                params.latents.clone(),
            );
        }
    }

    let (final_objective, best_step, ll, lv, ln, latents) = best;
    let kernel = Kernel::new(k0.family, ll.exp(), lv.exp())?;
    let model = GpModel::new(kernel, ln.map_or(0.0, f64::exp), &latents, y)?;
    Ok(FitReport {
        model,
        initial_objective,
        final_objective,
        best_step,
    })
}
