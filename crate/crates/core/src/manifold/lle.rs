use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::graph::{knn_graph, require_connected, reverse_cuthill_mckee, symmetrize, Neighbor};
use super::{check_finite, EmbeddedSpace, EmbeddingConfig};
use crate::linalg::{subspace_iteration, Cholesky, EnvelopeMatrix, SubspaceOptions};
use crate::{Error, Result, Scalar};

const RIDGE: f64 = 1e-3;

/// Barycentric reconstruction weights of each point from its k nearest
/// neighbors. Each local Gram matrix gets a ridge of `1e-3·trace(G)/k`.
/// Weights of every row sum to one.
pub fn lle_weights<T: Scalar>(x: ArrayView2<'_, T>, k: usize) -> Result<Vec<Vec<(usize, T)>>> {
    let knn = knn_graph(x, k)?;
    weights_from_knn(x, &knn)
}

fn weights_from_knn<T: Scalar>(x: ArrayView2<'_, T>, knn: &[Vec<Neighbor<T>>]) -> Result<Vec<Vec<(usize, T)>>> {
    knn.par_iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let k = nbrs.len();
            let xi = x.row(i);
            let diffs: Vec<Vec<T>> = nbrs
                .iter()
                .map(|nb| x.row(nb.index).iter().zip(xi.iter()).map(|(&a, &b)| a - b).collect())
                .collect();
            let mut g = Array2::<T>::from_shape_fn((k, k), |(a, b)| crate::linalg::dot(&diffs[a], &diffs[b]));
            let trace: T = (0..k).map(|a| g[[a, a]]).sum();
            let ridge = if trace > T::zero() { T::of(RIDGE) * trace / T::of_usize(k) } else { T::of(RIDGE) };
            for a in 0..k {
                g[[a, a]] += ridge;
            }
            let chol = Cholesky::new(&g)
                .ok_or_else(|| Error::EmbeddingFailure(format!("local Gram matrix of point {i} is singular")))?;
            let w = chol.solve(&vec![T::one(); k]);
            let total: T = w.iter().copied().sum();
            Ok(nbrs.iter().zip(w.iter()).map(|(nb, &wv)| (nb.index, wv / total)).collect())
        })
        .collect()
}

/// Locally linear embedding: bottom eigenvectors of `(I-W)ᵀ(I-W)` after the
/// constant one, scaled so every column has zero mean and unit mean square.
///
/// The eigenvectors come from shift-invert subspace iteration on an
/// envelope Cholesky factor of the matrix in reverse Cuthill-McKee order.
pub fn lle_embed<T: Scalar>(x_all: ArrayView2<'_, T>, config: &EmbeddingConfig) -> Result<EmbeddedSpace<T>> {
    let n = x_all.nrows();
    config.validate(n, x_all.ncols())?;
    let knn = knn_graph(x_all, config.k_neighbors)?;
    let adj = symmetrize(&knn);
    require_connected(&adj)?;
    let weights = weights_from_knn(x_all, &knn)?;

    // position of each node in the bandwidth-reducing order
    let order = reverse_cuthill_mckee(&adj);
    let mut pos = vec![0usize; n];
    for (p, &node) in order.iter().enumerate() {
        pos[node] = p;
    }

    // row r of (I-W) touches {r} ∪ N(r); those positions form a clique in M
    let mut first: Vec<usize> = (0..n).collect();
    for (r, w) in weights.iter().enumerate() {
        let lo = w.iter().map(|&(j, _)| pos[j]).chain(std::iter::once(pos[r])).min().unwrap();
        for p in w.iter().map(|&(j, _)| pos[j]).chain(std::iter::once(pos[r])) {
            first[p] = first[p].min(lo);
        }
    }
    let mut m = EnvelopeMatrix::<T>::zeros(first);
    for (r, w) in weights.iter().enumerate() {
        let entries: Vec<(usize, T)> =
            std::iter::once((pos[r], T::one())).chain(w.iter().map(|&(j, wv)| (pos[j], -wv))).collect();
        for (a, &(pa, va)) in entries.iter().enumerate() {
            for &(pb, vb) in &entries[..=a] {
                m.add(pa, pb, va * vb);
            }
        }
    }
    let trace: T = (0..n).map(|p| m.get(p, p)).sum();

    // M is singular along the constant vector; shift just enough to factor
    let base = if T::epsilon().as_f64() < 1e-10 { 1e-9 } else { 1e-5 };
    let mut shift = T::of(base) * trace / T::of_usize(n);
    let factor = loop {
        let mut f = m.clone();
        for p in 0..n {
            f.add(p, p, shift);
        }
        match f.cholesky_in_place() {
            Ok(()) => break f,
            Err(row) => {
                if shift > T::of(1e-3) * trace / T::of_usize(n) {
                    return Err(Error::EmbeddingFailure(format!(
                        "shifted LLE matrix is not positive definite (row {row})"
                    )));
                }
                shift *= T::of(10.0);
            }
        }
    };
    drop(m);

    let constant = vec![T::one() / T::of_usize(n).sqrt(); n];
    let opts = SubspaceOptions {
        block: config.target_dim + 4,
        max_iters: 2000,
        // the shifted solves limit attainable residuals to about 1e-8
        tol: if T::epsilon().as_f64() < 1e-10 { 1e-6 } else { 1e-3 },
        seed: 0x11e,
    };
    let solve_block = |q: &Array2<T>| {
        let mut out = q.clone();
        out.axis_iter_mut(Axis(0)).into_par_iter().for_each(|mut row| {
            factor.solve_in_place(row.as_slice_mut().unwrap());
        });
        out
    };
    let (_, vecs) = subspace_iteration(n, config.target_dim, &[constant], solve_block, &opts)?;

    let scale = T::of_usize(n).sqrt();
    let mut points = Array2::<T>::zeros((n, config.target_dim));
    for c in 0..config.target_dim {
        for (node, &p) in pos.iter().enumerate() {
            points[[node, c]] = vecs[[c, p]] * scale;
        }
    }
    check_finite(&points)?;
    Ok(EmbeddedSpace { points, source_count: n })
}
