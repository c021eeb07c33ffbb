//! Dense and envelope-sparse linear algebra used by the GP and the embeddings.
//!
//! Everything here is written against [`Scalar`](crate::Scalar) so the same
//! routines back both `f32` and `f64` models.

mod cholesky;
mod eigen;
mod envelope;

pub use cholesky::Cholesky;
pub use eigen::{orthonormalize_rows, subspace_iteration, symmetric_eigen, SubspaceOptions};
pub use envelope::EnvelopeMatrix;

use crate::Scalar;

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Dot product in twice the working precision (compensated summation of
/// error-free products), rounded once at the end.
pub(crate) fn dot2<T: Scalar>(a: &[T], b: &[T]) -> T {
    let (mut s, mut c) = (T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let p_err = x.mul_add(y, -p);
        let t = s + p;
        let z = t - s;
        let s_err = (s - (t - z)) + (p - z);
        s = t;
        c += s_err + p_err;
    }
    s + c
}

#[inline]
pub(crate) fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}
