use ndarray::{Array1, Array2, ArrayView2};

use super::kernel::{kernel_matrix, KernelMatrix, RbfHyperparams};
use crate::linalg::{dot, dot2, Cholesky};
use crate::{Error, Result, Scalar};

/// Zero-mean Gaussian log marginal likelihood
/// `-½(yᵀK⁻¹y + log|K| + m·log 2π)` of the pseudo-observations, where `K`
/// includes the matrix's jitter and noise. Evaluated through the Cholesky factor.
pub fn log_marginal_likelihood<T: Scalar>(y: &[T], k: &KernelMatrix<T>) -> Result<T> {
    if y.len() != k.order() {
        return Err(Error::DimensionMismatch { expected: k.order(), found: y.len() });
    }
    let chol = k.cholesky()?;
    Ok(lml_from_factor(y, &chol).0)
}

/// Log marginal likelihood and `α = K⁻¹y` from an existing factor. `α` is
/// refined, since `yᵀα` grows with the condition number of `K` and would
/// otherwise carry its rounding error.
pub(crate) fn lml_from_factor<T: Scalar>(y: &[T], chol: &Cholesky<T>) -> (T, Array1<T>) {
    let m = y.len();
    let alpha = chol.solve_refined(y);
    let quad = dot2(y, alpha.as_slice().unwrap());
    let two_pi = T::of(2.0 * std::f64::consts::PI);
    let lml = -T::of(0.5) * (quad + chol.log_det() + T::of_usize(m) * two_pi.ln());
    (lml, alpha)
}

/// Log marginal likelihood and its gradient with respect to
/// `(log C, log l_1, …, log l_d)`.
///
/// The jitter is `rel_jitter·C`, so it scales with the amplitude. The
/// optional per-centroid `noise` variances are fixed and do not.
pub fn lml_and_gradient<T: Scalar>(
    y: &[T],
    z: ArrayView2<'_, T>,
    params: &RbfHyperparams<T>,
    rel_jitter: T,
    noise: Option<&[T]>,
) -> Result<(T, Vec<T>)> {
    let m = z.nrows();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: y.len() });
    }
    if let Some(noise) = noise {
        if noise.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: noise.len() });
        }
    }
    let mut k = kernel_matrix(z, params, rel_jitter * params.amplitude());
    if let Some(noise) = noise {
        k = k.with_noise(Array1::from(noise.to_vec()));
    }
    let chol = k.cholesky()?;
    let (lml, alpha) = lml_from_factor(y, &chol);
    let k_inv = chol.inverse();

    // W = ααᵀ - K⁻¹ ; ∂L/∂φ = ½ Σ W ∘ ∂K/∂φ
    let w: Array2<T> = Array2::from_shape_fn((m, m), |(s, t)| alpha[s] * alpha[t] - k_inv[[s, t]]);
    let half = T::of(0.5);

    let mut grad = Vec::with_capacity(params.dim() + 1);
    // ∂K/∂log C = K + jitter·I  ⇒  ½(yᵀα - m), less the noise part
    let mut g_c = dot(y, alpha.as_slice().unwrap()) - T::of_usize(m);
    if let Some(noise) = noise {
        g_c -= (0..m).map(|s| w[[s, s]] * noise[s]).sum::<T>();
    }
    grad.push(half * g_c);

    let entries = k.entries();
    for (j, &l) in params.length_scales().iter().enumerate() {
        let mut g = T::zero();
        for s in 0..m {
            for t in 0..s {
                let u = (z[[s, j]] - z[[t, j]]) / l;
                g += w[[s, t]] * entries[[s, t]] * u * u;
            }
        }
        // the off-diagonal sum counts each symmetric pair once; ×2 cancels ½
        grad.push(g);
    }
    Ok((lml, grad))
}
