//! Gaussian-process regression over latent coordinates, including the
//! posterior of the decoder's Jacobian.

mod fit;
mod kernel;
mod model;

pub use fit::{fit, fit_hyperparameters, pca_latents, FitOptions, FitReport};
pub use kernel::{Kernel, KernelFamily};
pub use model::{GpModel, ModelFile, JITTER_MAX, JITTER_START};
