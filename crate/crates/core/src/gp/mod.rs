//! Gaussian-process mathematics over cluster centroids: the RBF kernel, the
//! zero-mean marginal likelihood of the pseudo-observations, hyperparameter
//! search in log space, and posterior prediction from a cached factor.

mod kernel;
pub(crate) mod likelihood;
mod model;
mod optimize;

pub use kernel::{
    factorize, kernel_matrix, rbf_kernel, scaled_sq_distance, JitterPolicy, KernelMatrix,
    RbfHyperparams,
};
pub use likelihood::{lml_and_gradient, log_marginal_likelihood};
pub use model::{posterior_predict, LfgpModel, PosteriorPrediction};
pub use optimize::{optimize_hyperparams, Optimum, OptimizerOptions};
