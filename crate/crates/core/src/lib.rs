//! Likelihood-free Gaussian process regression.
//!
//! Responses are grouped into clusters of bounded size, each cluster is
//! reduced to a summary statistic, and a GP with an RBF kernel is fitted to
//! those summaries placed at the cluster centroids. Clustering and kernel
//! hyperparameters are optimized alternately.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the usual `f64` choice.

pub mod backtest;
pub mod clustering;
pub mod error;
pub mod estimators;
pub mod gp;
pub mod linalg;
pub mod datasets;
pub mod manifold;
pub mod persist;
pub mod trainer;
mod scalar;

pub use clustering::{recursive_cluster, ClusterMetric, Clustering};
pub use error::{Error, Result};
pub use estimators::{estimate_statistic, StatisticKind};
pub use gp::{LfgpModel, PosteriorPrediction, RbfHyperparams};
pub use manifold::{EmbeddingConfig, EmbeddingMethod};
pub use scalar::Scalar;
pub use trainer::{fit, fit_embedded, predict_batch, ClusterMode, FitConfig, FitReport, NoiseModel};

pub type Model = LfgpModel<f64>;
pub type Model32 = LfgpModel<f32>;
pub type Hyperparams = RbfHyperparams<f64>;

/// Derives an independent seed for a sub-stream (splitmix64 finalizer).
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
