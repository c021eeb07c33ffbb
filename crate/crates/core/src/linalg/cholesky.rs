use ndarray::{Array1, Array2};

use super::{dot, dot2};
use crate::Scalar;

/// Lower-triangular Cholesky factor `L` with `A = L·Lᵀ`. Keeps `A` for
/// iterative refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    lower: Array2<T>,
    matrix: Array2<T>,
}

const MAX_REFINEMENTS: usize = 4;

impl<T: Scalar> Cholesky<T> {
    /// Factorizes a symmetric matrix, reading only its lower triangle.
    /// Returns `None` when a pivot is non-positive or non-finite.
    pub fn new(a: &Array2<T>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "Cholesky needs a square matrix");
        let mut lower = Array2::<T>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let s = {
                    let li = lower.row(i);
                    let lj = lower.row(j);
                    let li = li.as_slice().expect("standard layout");
                    let lj = lj.as_slice().expect("standard layout");
                    a[[i, j]] - dot(&li[..j], &lj[..j])
                };
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return None;
                    }
                    lower[[i, i]] = s.sqrt();
                } else {
                    lower[[i, j]] = s / lower[[j, j]];
                }
            }
        }
        let mut matrix = a.clone();
        for i in 0..n {
            for j in i + 1..n {
                matrix[[i, j]] = matrix[[j, i]];
            }
        }
        Some(Self { lower, matrix })
    }

    pub fn lower(&self) -> &Array2<T> {
        &self.lower
    }

    pub fn order(&self) -> usize {
        self.lower.nrows()
    }

    /// Solves `L·y = b`.
    pub fn solve_lower(&self, b: &[T]) -> Array1<T> {
        let n = self.order();
        assert_eq!(b.len(), n);
        let mut y = Array1::<T>::zeros(n);
        {
            let ys = y.as_slice_mut().expect("contiguous");
            for i in 0..n {
                let row = self.lower.row(i);
                let row = row.as_slice().expect("standard layout");
                ys[i] = (b[i] - dot(&row[..i], &ys[..i])) / row[i];
            }
        }
        y
    }

    /// Solves `Lᵀ·x = y`.
    pub fn solve_upper(&self, y: &[T]) -> Array1<T> {
        let n = self.order();
        assert_eq!(y.len(), n);
        let mut x = Array1::from(y.to_vec());
        let xs = x.as_slice_mut().expect("contiguous");
        for i in (0..n).rev() {
            xs[i] /= self.lower[[i, i]];
            let xi = xs[i];
            let row = self.lower.row(i);
            for (xk, &l) in xs[..i].iter_mut().zip(row.iter()) {
                *xk -= l * xi;
            }
        }
        x
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[T]) -> Array1<T> {
        let y = self.solve_lower(b);
        self.solve_upper(y.as_slice().expect("contiguous"))
    }

    /// Solves `A·x = b`, then refines `x` with residuals accumulated in twice
    /// the working precision. On an ill-conditioned `A` this recovers digits
    /// a plain solve loses. A correction is applied only once the next one
    /// shows the iteration contracting, so hopeless conditioning falls back
    /// to the plain solve.
    pub fn solve_refined(&self, b: &[T]) -> Array1<T> {
        let mut x = self.solve(b);
        let mut dx = self.correction(b, &x);
        for _ in 0..MAX_REFINEMENTS {
            let step = max_abs(dx.as_slice().unwrap());
            if step <= T::epsilon() * max_abs(x.as_slice().unwrap()) {
                x += &dx;
                break;
            }
            let candidate = &x + &dx;
            let next = self.correction(b, &candidate);
            if !(max_abs(next.as_slice().unwrap()) <= T::of(0.5) * step) {
                break;
            }
            x = candidate;
            dx = next;
        }
        x
    }

    fn correction(&self, b: &[T], x: &Array1<T>) -> Array1<T> {
        self.solve(&self.residual(b, x.as_slice().unwrap()))
    }

    /// `b - A·x`, each component rounded once.
    fn residual(&self, b: &[T], x: &[T]) -> Vec<T> {
        let mut row_and_b = Vec::with_capacity(x.len() + 1);
        let mut x_and_one = x.to_vec();
        x_and_one.push(-T::one());
        self.matrix
            .rows()
            .into_iter()
            .zip(b)
            .map(|(row, &bi)| {
                row_and_b.clear();
                row_and_b.extend(row.iter().copied());
                row_and_b.push(bi);
                -dot2(&row_and_b, &x_and_one)
            })
            .collect()
    }

    /// `log |A|`.
    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        self.lower.diag().iter().map(|&d| two * d.ln()).sum()
    }

    /// `A⁻¹`, via `L⁻ᵀ·L⁻¹`.
    pub fn inverse(&self) -> Array2<T> {
        let n = self.order();
        // rows of `inv_lower_t` are the columns of L⁻¹
        let mut inv_lower_t = Array2::<T>::zeros((n, n));
        let mut e = vec![T::zero(); n];
        for k in 0..n {
            e[k] = T::one();
            let col = self.solve_lower(&e);
            inv_lower_t.row_mut(k).assign(&col);
            e[k] = T::zero();
        }
        // (L⁻¹)ᵀ·L⁻¹
        inv_lower_t.dot(&inv_lower_t.t())
    }

    /// Reassembles `L·Lᵀ`.
    pub fn reconstruct(&self) -> Array2<T> {
        self.lower.dot(&self.lower.t())
    }
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn factors_small_spd_matrix() {
        let a = array![[4.0f64, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let c = Cholesky::new(&a).unwrap();
        let r = c.reconstruct();
        for (x, y) in r.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        let back = a.dot(&x);
        for (u, v) in back.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        let inv = c.inverse();
        let eye = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((eye[[i, j]] - want).abs() < 1e-12);
            }
        }
        // det = 4(15-1) - 2(6-0.4) + 0.4(2-2) = 44.8
        assert!((c.log_det() - 44.8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dot2_survives_cancellation() {
        let a = [1e16, 1.0, -1e16];
        let b = [1.0, 1.0, 1.0];
        assert_eq!(dot(&a, &b), 0.0);
        assert_eq!(dot2(&a, &b), 1.0);
    }

    #[test]
    fn rejects_singular_matrix() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(Cholesky::new(&a).is_none());
        let a = array![[1.0f32, 0.0], [0.0, -1.0]];
        assert!(Cholesky::new(&a).is_none());
    }
}
