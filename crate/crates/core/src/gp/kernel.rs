use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::linalg::Cholesky;
use crate::{Error, Result, Scalar};

/// Amplitude `C` and per-dimension length scales `l` of the RBF kernel
/// `C·exp(-A/2)`, `A = Σ_j ((x_j - x'_j)/l_j)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfHyperparams<T> {
    amplitude: T,
    length_scales: Vec<T>,
}

impl<T: Scalar> RbfHyperparams<T> {
    pub fn new(amplitude: T, length_scales: Vec<T>) -> Result<Self> {
        if !(amplitude > T::zero() && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude must be positive, got {amplitude}")));
        }
        if length_scales.is_empty() {
            return Err(Error::InvalidParameter("at least one length scale is required".into()));
        }
        if let Some(l) = length_scales.iter().find(|l| !(**l > T::zero() && l.is_finite())) {
            return Err(Error::InvalidParameter(format!("length scales must be positive, got {l}")));
        }
        Ok(Self { amplitude, length_scales })
    }

    /// Isotropic parameters with every length scale equal to `length_scale`.
    pub fn isotropic(amplitude: T, length_scale: T, dim: usize) -> Result<Self> {
        Self::new(amplitude, vec![length_scale; dim])
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn length_scales(&self) -> &[T] {
        &self.length_scales
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// `(log C, log l_1, …, log l_d)`.
    pub fn to_log(&self) -> Vec<T> {
        std::iter::once(self.amplitude.ln())
            .chain(self.length_scales.iter().map(|l| l.ln()))
            .collect()
    }

    pub fn from_log(log_params: &[T]) -> Result<Self> {
        let (c, ls) = log_params
            .split_first()
            .ok_or_else(|| Error::InvalidParameter("empty log-parameter vector".into()))?;
        Self::new(c.exp(), ls.iter().map(|l| l.exp()).collect())
    }
}

/// The rescaled squared distance `A(x_s, x_t)`.
#[inline]
pub fn scaled_sq_distance<T: Scalar>(xs: &[T], xt: &[T], length_scales: &[T]) -> T {
    xs.iter()
        .zip(xt)
        .zip(length_scales)
        .fold(T::zero(), |acc, ((&a, &b), &l)| {
            let u = (a - b) / l;
            acc + u * u
        })
}

/// RBF covariance between two points.
///
/// Panics when the dimensions of the points and the length scales differ.
pub fn rbf_kernel<T: Scalar>(xs: &[T], xt: &[T], params: &RbfHyperparams<T>) -> T {
    assert!(
        xs.len() == params.dim() && xt.len() == params.dim(),
        "rbf_kernel: points of dimension {} and {} against {} length scales",
        xs.len(),
        xt.len(),
        params.dim()
    );
    params.amplitude * (-scaled_sq_distance(xs, xt, &params.length_scales) / T::of(2.0)).exp()
}

/// Kernel matrix over a set of centroids. The diagonal jitter and the
/// optional per-centroid noise variances are kept apart from the exact
/// kernel entries.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<T> {
    entries: Array2<T>,
    jitter: T,
    noise: Option<Array1<T>>,
}

impl<T: Scalar> KernelMatrix<T> {
    pub fn entries(&self) -> &Array2<T> {
        &self.entries
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn noise(&self) -> Option<&Array1<T>> {
        self.noise.as_ref()
    }

    pub fn with_jitter(&self, jitter: T) -> Self {
        Self { entries: self.entries.clone(), jitter, noise: self.noise.clone() }
    }

    /// Adds `diag(noise)` to the matrix that gets factorized.
    pub fn with_noise(mut self, noise: Array1<T>) -> Self {
        assert!(noise.len() == self.order(), "one noise variance per centroid");
        assert!(noise.iter().all(|v| *v >= T::zero()), "noise variances must be non-negative");
        self.noise = Some(noise);
        self
    }

    /// `K + diag(noise) + jitter·I`.
    pub fn jittered(&self) -> Array2<T> {
        let mut k = self.entries.clone();
        for i in 0..k.nrows() {
            k[[i, i]] += self.jitter;
            if let Some(noise) = &self.noise {
                k[[i, i]] += noise[i];
            }
        }
        k
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        let n = self.order();
        (0..n).all(|i| (0..i).all(|j| (self.entries[[i, j]] - self.entries[[j, i]]).abs() <= tol))
    }

    /// Factorizes [`jittered`](Self::jittered) with exactly the stored jitter.
    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        Cholesky::new(&self.jittered()).ok_or(Error::IllConditioned { jitter: self.jitter.as_f64() })
    }
}

/// Assembles `[K]_{s,t} = k(z_s, z_t)` and records `jitter` for the diagonal.
pub fn kernel_matrix<T: Scalar>(
    z: ArrayView2<'_, T>,
    params: &RbfHyperparams<T>,
    jitter: T,
) -> KernelMatrix<T> {
    let m = z.nrows();
    assert!(z.ncols() == params.dim(), "centroid dimension does not match length scales");
    assert!(jitter >= T::zero(), "jitter must be non-negative");
    // work in rescaled coordinates so each entry is a plain squared distance
    let scaled = Array2::from_shape_fn(z.dim(), |(i, j)| z[[i, j]] / params.length_scales[j]);
    let mut entries = Array2::<T>::zeros((m, m));
    let half = T::of(0.5);
    for s in 0..m {
        entries[[s, s]] = params.amplitude;
        let zs = scaled.row(s);
        for t in 0..s {
            let zt = scaled.row(t);
            let a = zs.iter().zip(zt.iter()).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
            let v = params.amplitude * (-a * half).exp();
            entries[[s, t]] = v;
            entries[[t, s]] = v;
        }
    }
    KernelMatrix { entries, jitter, noise: None }
}

/// Diagonal jitter schedule, expressed relative to the amplitude `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub initial: f64,
    pub max: f64,
    pub growth: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self { initial: 1e-8, max: 1e-2, growth: 10.0 }
    }
}

impl JitterPolicy {
    /// Relative jitter levels tried in order.
    pub fn ladder(&self) -> Vec<f64> {
        let mut out = vec![self.initial];
        let mut j = self.initial;
        while j * self.growth <= self.max * (1.0 + 1e-9) {
            j *= self.growth;
            out.push(j);
        }
        out
    }
}

/// Builds and factorizes the kernel matrix, escalating the jitter along the
/// policy's ladder until the factorization succeeds. Returns the relative
/// jitter that worked alongside the matrix and its factor.
pub fn factorize<T: Scalar>(
    z: ArrayView2<'_, T>,
    params: &RbfHyperparams<T>,
    noise: Option<&[T]>,
    policy: &JitterPolicy,
) -> Result<(KernelMatrix<T>, Cholesky<T>, f64)> {
    let mut base = kernel_matrix(z, params, T::zero());
    if let Some(noise) = noise {
        base = base.with_noise(Array1::from(noise.to_vec()));
    }
    let mut last = 0.0;
    for rel in policy.ladder() {
        let k = base.with_jitter(T::of(rel) * params.amplitude);
        if let Ok(chol) = k.cholesky() {
            return Ok((k, chol, rel));
        }
        last = rel * params.amplitude.as_f64();
    }
    Err(Error::IllConditioned { jitter: last })
}
