use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues of a posterior covariance above `-EIGEN_CLAMP_TOL` are treated
/// as round-off and clamped to zero.
pub const EIGEN_CLAMP_TOL: f64 = 1e-10;

/// Gaussian posterior over the Jacobian of the decoder at one latent point.
///
/// Every one of the `D` rows of `J` is independent with its own mean (a row of
/// `mean`) and the shared `q × q` covariance `cov`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPosterior {
    pub mean: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    pub dim_data: usize,
}

impl JacobianPosterior {
    pub fn new(mean: DMatrix<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let q = mean.ncols();
        if q == 0 || mean.nrows() == 0 {
            return Err(Error::Shape("Jacobian mean must be non-empty".into()));
        }
        if cov.nrows() != q || cov.ncols() != q {
            return Err(Error::Shape(format!(
                "covariance is {}x{}, expected {q}x{q}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("Jacobian posterior has non-finite entries".into()));
        }
        let dim_data = mean.nrows();
        Ok(Self {
            mean,
            cov: clamp_psd(&cov),
            dim_data,
        })
    }

    /// A deterministic Jacobian: zero covariance.
    pub fn deterministic(mean: DMatrix<f64>) -> Result<Self> {
        let q = mean.ncols();
        Self::new(mean, DMatrix::zeros(q, q))
    }

    pub fn dim_latent(&self) -> usize {
        self.mean.ncols()
    }
}

/// Symmetrizes `m` and clamps eigenvalues in `[-EIGEN_CLAMP_TOL, 0)` to zero.
///
/// Larger negative eigenvalues are clamped too, but reported through the log.
pub fn clamp_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return sym;
    }
    if let Some(min) = eig.eigenvalues.iter().copied().reduce(f64::min) {
        let scale = eig.eigenvalues.amax().max(1.0);
        if min < -EIGEN_CLAMP_TOL * scale {
            log::warn!("clamping covariance eigenvalue {min:e} to zero");
        }
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}
