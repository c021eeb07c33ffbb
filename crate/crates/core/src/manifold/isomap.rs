use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::graph::{knn_graph, require_connected, symmetrize, Neighbor};
use super::{check_finite, EmbeddedSpace, EmbeddingConfig};
use crate::linalg::{subspace_iteration, SubspaceOptions};
use crate::{Result, Scalar};

/// Adjacency in compressed rows, which keeps each source's scan cache
/// friendly.
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

impl Csr {
    fn new<T: Scalar>(adj: &[Vec<Neighbor<T>>]) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for list in adj {
            for nb in list {
                targets.push(nb.index as u32);
                weights.push(nb.distance.as_f64());
            }
            offsets.push(targets.len());
        }
        Self { offsets, targets, weights }
    }
}

fn dijkstra_into(g: &Csr, source: usize, dist: &mut [f64], done: &mut [bool], heap: &mut BinaryHeap<Reverse<(u64, u32)>>) {
    dist.iter_mut().for_each(|d| *d = f64::INFINITY);
    done.iter_mut().for_each(|v| *v = false);
    heap.clear();
    dist[source] = 0.0;
    // non-negative doubles order like their bit patterns
    heap.push(Reverse((0f64.to_bits(), source as u32)));
    while let Some(Reverse((bits, u))) = heap.pop() {
        let u = u as usize;
        if done[u] {
            continue;
        }
        done[u] = true;
        let du = f64::from_bits(bits);
        for e in g.offsets[u]..g.offsets[u + 1] {
            let v = g.targets[e] as usize;
            let alt = du + g.weights[e];
            if alt < dist[v] {
                dist[v] = alt;
                heap.push(Reverse((alt.to_bits(), v as u32)));
            }
        }
    }
}

/// All-pairs geodesic distances over the symmetrized k-NN graph.
pub(crate) fn geodesic_distances<T: Scalar>(x: ArrayView2<'_, T>, k: usize) -> Result<Array2<T>> {
    let adj = symmetrize(&knn_graph(x, k)?);
    require_connected(&adj)?;
    let n = x.nrows();
    let g = Csr::new(&adj);
    let mut d = Array2::<T>::zeros((n, n));
    d.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each_init(
        || (vec![0.0; n], vec![false; n], BinaryHeap::new()),
        |(dist, done, heap), (i, mut row)| {
            dijkstra_into(&g, i, dist, done, heap);
            for (slot, &v) in row.iter_mut().zip(dist.iter()) {
                *slot = T::of(v);
            }
        },
    );
    // Dijkstra is exact per source; symmetrize away accumulated rounding
    for i in 0..n {
        for j in 0..i {
            let v = (d[[i, j]] + d[[j, i]]) * T::of(0.5);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    Ok(d)
}

/// Isomap: classical MDS on the geodesic distances of the symmetrized
/// k-NN graph, keeping the top `target_dim` components.
pub fn isomap_embed<T: Scalar>(x_all: ArrayView2<'_, T>, config: &EmbeddingConfig) -> Result<EmbeddedSpace<T>> {
    let n = x_all.nrows();
    config.validate(n, x_all.ncols())?;
    let mut b = geodesic_distances(x_all, config.k_neighbors)?;

    // B = -½ J D² J, in place
    b.mapv_inplace(|v| v * v);
    let row_means: Vec<T> = b.rows().into_iter().map(|r| r.sum() / T::of_usize(n)).collect();
    let grand = row_means.iter().copied().sum::<T>() / T::of_usize(n);
    let half = T::of(0.5);
    b.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(i, mut row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = -half * (*v - row_means[i] - row_means[j] + grand);
        }
    });

    let opts = SubspaceOptions {
        block: config.target_dim + 4,
        max_iters: 1000,
        tol: if T::epsilon().as_f64() < 1e-10 { 1e-10 } else { 1e-5 },
        seed: 0x150,
    };
    let (vals, vecs) = subspace_iteration(n, config.target_dim, &[], |q| q.dot(&b), &opts)?;
    let mut points = Array2::<T>::zeros((n, config.target_dim));
    for (c, &lambda) in vals.iter().enumerate() {
        let scale = lambda.max(T::zero()).sqrt();
        for i in 0..n {
            points[[i, c]] = vecs[[c, i]] * scale;
        }
    }
    check_finite(&points)?;
    Ok(EmbeddedSpace { points, source_count: n })
}
