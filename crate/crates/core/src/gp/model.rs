use ndarray::{Array1, Array2};

use super::kernel::{kernel_matrix, RbfHyperparams};
use super::likelihood::lml_from_factor;
use crate::estimators::StatisticKind;
use crate::linalg::{dot2, Cholesky};
use crate::manifold::EmbeddingState;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPrediction<T> {
    pub mean: T,
    pub variance: T,
}

/// A fitted likelihood-free GP: optimized hyperparameters, the centroids
/// and their pseudo-observations, and the cached factor of
/// `K + diag(noise) + jitter·I`.
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct LfgpModel<T> {
    hyperparams: RbfHyperparams<T>,
    centroids: Array2<T>,
    pseudo_observations: Array1<T>,
    statistic: StatisticKind,
    jitter: T,
    noise: Option<Array1<T>>,
    embedding: Option<EmbeddingState<T>>,
    chol: Cholesky<T>,
    alpha: Array1<T>,
    lml: T,
}

impl<T: Scalar> LfgpModel<T> {
    /// Factorizes the kernel matrix with exactly `jitter` and, if given, the
    /// per-centroid `noise` variances on the diagonal.
    pub fn new(
        hyperparams: RbfHyperparams<T>,
        centroids: Array2<T>,
        pseudo_observations: Array1<T>,
        statistic: StatisticKind,
        jitter: T,
        noise: Option<Array1<T>>,
        embedding: Option<EmbeddingState<T>>,
    ) -> Result<Self> {
        if centroids.ncols() != hyperparams.dim() {
            return Err(Error::DimensionMismatch { expected: hyperparams.dim(), found: centroids.ncols() });
        }
        if pseudo_observations.len() != centroids.nrows() {
            return Err(Error::DimensionMismatch {
                expected: centroids.nrows(),
                found: pseudo_observations.len(),
            });
        }
        if centroids.nrows() == 0 {
            return Err(Error::InsufficientData { needed: 1, found: 0 });
        }
        if let Some(v) = &noise {
            if v.len() != centroids.nrows() {
                return Err(Error::DimensionMismatch { expected: centroids.nrows(), found: v.len() });
            }
            if v.iter().any(|x| !(*x >= T::zero()) || !x.is_finite()) {
                return Err(Error::InvalidParameter("noise variances must be finite and non-negative".into()));
            }
        }
        let mut k = kernel_matrix(centroids.view(), &hyperparams, jitter);
        if let Some(v) = &noise {
            k = k.with_noise(v.clone());
        }
        let chol = k.cholesky()?;
        let (lml, alpha) = lml_from_factor(pseudo_observations.as_slice().unwrap(), &chol);
        Ok(Self { hyperparams, centroids, pseudo_observations, statistic, jitter, noise, embedding, chol, alpha, lml })
    }

    pub fn hyperparams(&self) -> &RbfHyperparams<T> {
        &self.hyperparams
    }

    pub fn centroids(&self) -> &Array2<T> {
        &self.centroids
    }

    pub fn pseudo_observations(&self) -> &Array1<T> {
        &self.pseudo_observations
    }

    pub fn statistic(&self) -> StatisticKind {
        self.statistic
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Sampling variances of the pseudo-observations, when the fit used them.
    pub fn noise(&self) -> Option<&Array1<T>> {
        self.noise.as_ref()
    }

    pub fn embedding(&self) -> Option<&EmbeddingState<T>> {
        self.embedding.as_ref()
    }

    pub fn cholesky(&self) -> &Cholesky<T> {
        &self.chol
    }

    pub fn alpha(&self) -> &Array1<T> {
        &self.alpha
    }

    /// Log marginal likelihood of the stored pseudo-observations.
    pub fn log_marginal_likelihood(&self) -> T {
        self.lml
    }

    pub fn cluster_count(&self) -> usize {
        self.centroids.nrows()
    }

    /// Dimension of the space predictions are made in (after embedding).
    pub fn dim(&self) -> usize {
        self.centroids.ncols()
    }

    /// Posterior mean `k*ᵀα` and variance `k** - k*ᵀ(K+Σ+jitter·I)⁻¹k*` of
    /// the latent statistic at a point of the model's (possibly embedded)
    /// space. `Σ` is zero unless the model carries noise variances.
    pub fn predict(&self, x_star: &[T]) -> Result<PosteriorPrediction<T>> {
        if x_star.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x_star.len() });
        }
        let k_star: Vec<T> = self
            .centroids
            .rows()
            .into_iter()
            .map(|z| super::rbf_kernel(z.as_slice().unwrap(), x_star, &self.hyperparams))
            .collect();
        let mean = dot2(&k_star, self.alpha.as_slice().unwrap());
        let w = self.chol.solve_refined(&k_star);
        let variance = (self.hyperparams.amplitude() - dot2(&k_star, w.as_slice().unwrap())).max(T::zero());
        Ok(PosteriorPrediction { mean, variance })
    }
}

/// Free-function form of [`LfgpModel::predict`].
pub fn posterior_predict<T: Scalar>(x_star: &[T], model: &LfgpModel<T>) -> Result<PosteriorPrediction<T>> {
    model.predict(x_star)
}
