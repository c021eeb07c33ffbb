use std::collections::VecDeque;

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::linalg::squared_distance;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    /// Euclidean (not squared) distance.
    pub distance: T,
}

/// Exact k nearest neighbors of every row (brute force), nearest first.
/// Ties are broken by index.
pub fn knn_graph<T: Scalar>(x: ArrayView2<'_, T>, k: usize) -> Result<Vec<Vec<Neighbor<T>>>> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("k must lie in 1..{n}, got {k}")));
    }
    let x = x.as_standard_layout();
    let rows: Vec<&[T]> = (0..n).map(|i| {
        let d = x.ncols();
        &x.as_slice().unwrap()[i * d..(i + 1) * d]
    }).collect();
    let order = |a: &(T, usize), b: &(T, usize)| {
        a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1))
    };
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(T, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(rows[i], rows[j]), j))
                .collect();
            cand.select_nth_unstable_by(k - 1, order);
            cand.truncate(k);
            cand.sort_unstable_by(order);
            cand.into_iter().map(|(d2, j)| Neighbor { index: j, distance: d2.sqrt() }).collect()
        })
        .collect())
}

/// Undirected adjacency lists of the symmetrized neighbor graph, sorted by
/// index and deduplicated.
pub(crate) fn symmetrize<T: Scalar>(knn: &[Vec<Neighbor<T>>]) -> Vec<Vec<Neighbor<T>>> {
    let mut adj: Vec<Vec<Neighbor<T>>> = knn.to_vec();
    for (i, nbrs) in knn.iter().enumerate() {
        for nb in nbrs {
            adj[nb.index].push(Neighbor { index: i, distance: nb.distance });
        }
    }
    for list in adj.iter_mut() {
        list.sort_by(|a, b| a.index.cmp(&b.index));
        list.dedup_by(|a, b| a.index == b.index);
    }
    adj
}

/// Number of connected components of an undirected adjacency structure.
pub fn connected_components<T>(adj: &[Vec<Neighbor<T>>]) -> usize {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for nb in &adj[u] {
                if !seen[nb.index] {
                    seen[nb.index] = true;
                    queue.push_back(nb.index);
                }
            }
        }
    }
    components
}

pub(crate) fn require_connected<T>(adj: &[Vec<Neighbor<T>>]) -> Result<()> {
    match connected_components(adj) {
        1 => Ok(()),
        components => Err(Error::Disconnected { components }),
    }
}

/// Reverse Cuthill-McKee ordering of a connected graph: `order[pos] = node`.
pub(crate) fn reverse_cuthill_mckee<T>(adj: &[Vec<Neighbor<T>>]) -> Vec<usize> {
    let n = adj.len();
    let bfs_last = |start: usize| -> usize {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut last = start;
        while let Some(u) = queue.pop_front() {
            last = u;
            for nb in &adj[u] {
                if !seen[nb.index] {
                    seen[nb.index] = true;
                    queue.push_back(nb.index);
                }
            }
        }
        last
    };
    // pseudo-peripheral start: two BFS sweeps
    let start = bfs_last(bfs_last(0));

    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    seen[start] = true;
    order.push(start);
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        let mut next: Vec<usize> = adj[u].iter().map(|nb| nb.index).filter(|&v| !seen[v]).collect();
        next.sort_by_key(|&v| (adj[v].len(), v));
        for v in next {
            seen[v] = true;
            order.push(v);
        }
    }
    order.reverse();
    order
}
