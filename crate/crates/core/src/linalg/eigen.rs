use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dot;
use crate::{Error, Result, Scalar};

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second matrix.
pub fn symmetric_eigen<T: Scalar>(a: &Array2<T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigendecomposition needs a square matrix");
    let mut a = a.clone();
    let mut v = Array2::<T>::eye(n);
    let eps = T::epsilon();

    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for p in 0..n {
            for q in 0..n {
                let x = a[[p, q]] * a[[p, q]];
                total += x;
                if p != q {
                    off += x;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (T::of(2.0) * apq);
                let t = if theta.abs() > T::of(1e15) {
                    T::one() / (T::of(2.0) * theta)
                } else {
                    let sign = if theta < T::zero() { -T::one() } else { T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].partial_cmp(&a[[j, j]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let vectors = v.select(Axis(1), &order);
    (values, vectors)
}

/// Orthonormalizes the rows of `q` in place (modified Gram-Schmidt, two
/// passes), first projecting out the unit vectors in `deflate`.
///
/// Rows that collapse numerically are replaced by fresh random directions.
pub fn orthonormalize_rows<T: Scalar>(q: &mut Array2<T>, deflate: &[Vec<T>], rng: &mut ChaCha8Rng) {
    let (p, n) = q.dim();
    for i in 0..p {
        let mut attempts = 0;
        loop {
            let before = {
                let r = q.row(i);
                dot(r.as_slice().unwrap(), r.as_slice().unwrap()).sqrt()
            };
            for _pass in 0..2 {
                for u in deflate {
                    let mut r = q.row_mut(i);
                    let rs = r.as_slice_mut().unwrap();
                    let c = dot(rs, u);
                    for (x, &uu) in rs.iter_mut().zip(u) {
                        *x -= c * uu;
                    }
                }
                for j in 0..i {
                    let (done, mut rest) = q.view_mut().split_at(Axis(0), i);
                    let qj = done.row(j);
                    let qj = qj.as_slice().unwrap();
                    let mut r = rest.row_mut(0);
                    let rs = r.as_slice_mut().unwrap();
                    let c = dot(rs, qj);
                    for (x, &y) in rs.iter_mut().zip(qj) {
                        *x -= c * y;
                    }
                }
            }
            let mut r = q.row_mut(i);
            let rs = r.as_slice_mut().unwrap();
            let norm = dot(rs, rs).sqrt();
            if norm > T::of(1e-8) * before.max(T::min_positive_value()) && norm.is_finite() && norm > T::zero() {
                for x in rs.iter_mut() {
                    *x /= norm;
                }
                break;
            }
            attempts += 1;
            assert!(attempts < 16, "cannot find an independent direction in dimension {n}");
            for x in rs.iter_mut() {
                *x = T::of(rng.random::<f64>() - 0.5);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubspaceOptions {
    /// Block size; must exceed the number of wanted pairs.
    pub block: usize,
    pub max_iters: usize,
    /// Residual tolerance relative to the largest Ritz value magnitude.
    pub tol: f64,
    pub seed: u64,
}

/// Block subspace iteration with Rayleigh-Ritz extraction for the `wanted`
/// algebraically largest eigenpairs of the symmetric operator `op`.
///
/// `op` maps a `p×n` block whose rows are vectors to the block of images.
/// Vectors in `deflate` (orthonormal) are kept out of the search space.
/// Returns eigenvalues in descending order and the eigenvectors as rows,
/// each sign-normalized so its largest-magnitude entry is positive.
pub fn subspace_iteration<T, F>(
    n: usize,
    wanted: usize,
    deflate: &[Vec<T>],
    mut op: F,
    opts: &SubspaceOptions,
) -> Result<(Vec<T>, Array2<T>)>
where
    T: Scalar,
    F: FnMut(&Array2<T>) -> Array2<T>,
{
    let p = opts.block.max(wanted + 1).min(n - deflate.len());
    if wanted > p {
        return Err(Error::EmbeddingFailure(format!(
            "cannot extract {wanted} eigenpairs from a space of dimension {}",
            n - deflate.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q = Array2::<T>::from_shape_fn((p, n), |_| T::of(rng.random::<f64>() - 0.5));
    orthonormalize_rows(&mut q, deflate, &mut rng);

    let tol = T::of(opts.tol);
    let mut last_residual = T::infinity();
    for _iter in 0..opts.max_iters {
        let y = op(&q);
        let h = q.dot(&y.t());
        let h = (&h + &h.t()) * T::of(0.5);
        let (vals, vecs) = symmetric_eigen(&h);
        // descending
        let order: Vec<usize> = (0..p).rev().collect();
        let s = vecs.select(Axis(1), &order);
        let theta: Vec<T> = order.iter().map(|&i| vals[i]).collect();
        let x = s.t().dot(&q);
        let ax = s.t().dot(&y);

        let scale = theta.iter().fold(T::zero(), |m, t| m.max(t.abs())).max(T::min_positive_value());
        let mut worst = T::zero();
        for i in 0..wanted {
            let r = ax.row(i).to_owned() - &(x.row(i).to_owned() * theta[i]);
            let res = r.dot(&r).sqrt() / scale;
            worst = worst.max(res);
        }
        last_residual = worst;
        if worst <= tol {
            let mut out = x.slice(ndarray::s![..wanted, ..]).to_owned();
            for mut row in out.rows_mut() {
                let mut best = T::zero();
                for &v in row.iter() {
                    if v.abs() > best.abs() {
                        best = v;
                    }
                }
                if best < T::zero() {
                    row.mapv_inplace(|v| -v);
                }
            }
            return Ok((theta[..wanted].to_vec(), out));
        }
        q = ax;
        orthonormalize_rows(&mut q, deflate, &mut rng);
    }
    Err(Error::EmbeddingFailure(format!(
        "eigensolver did not converge in {} iterations (residual {:e})",
        opts.max_iters,
        last_residual.as_f64()
    )))
}
