//! Size-constrained recursive bisection: 2-means splits in the length-scale
//! rescaled feature space, with an even random split whenever a 2-means
//! split would leave a side below the minimum cluster size.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gp::{scaled_sq_distance, RbfHyperparams};
use crate::linalg::{squared_distance, symmetric_eigen};
use crate::{mix_seed, Error, Result, Scalar};

const LLOYD_MAX_ITERS: usize = 100;
const PARALLEL_THRESHOLD: usize = 8192;

/// Geometry the clustering runs in.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterMetric<T> {
    /// `A(x, z)`: squared distance after dividing each coordinate by its
    /// length scale.
    RescaledRbf { length_scales: Vec<T> },
    /// `B(x, z)`: raw squared Euclidean distance.
    EuclideanBaseline,
}

impl<T: Scalar> ClusterMetric<T> {
    pub fn rescaled(length_scales: Vec<T>) -> Result<Self> {
        if length_scales.iter().any(|l| !(*l > T::zero() && l.is_finite())) {
            return Err(Error::InvalidParameter("clustering length scales must be positive".into()));
        }
        Ok(Self::RescaledRbf { length_scales })
    }

    /// Squared distance between two points in feature units.
    pub fn distance(&self, a: &[T], b: &[T]) -> T {
        match self {
            Self::RescaledRbf { length_scales } => scaled_sq_distance(a, b, length_scales),
            Self::EuclideanBaseline => squared_distance(a, b),
        }
    }

    /// Maps feature coordinates into the metric's Euclidean space.
    fn transform(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        match self {
            Self::RescaledRbf { length_scales } => {
                if length_scales.len() != x.ncols() {
                    return Err(Error::DimensionMismatch { expected: length_scales.len(), found: x.ncols() });
                }
                Ok(Array2::from_shape_fn(x.dim(), |(i, j)| x[[i, j]] / length_scales[j]))
            }
            Self::EuclideanBaseline => Ok(x.as_standard_layout().into_owned()),
        }
    }
}

/// Cluster assignment (0-based ids), centroids in feature units, and sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering<T> {
    assignments: Vec<usize>,
    centroids: Array2<T>,
    sizes: Vec<usize>,
}

impl<T: Scalar> Clustering<T> {
    /// Builds a clustering from explicit member lists; centroids are the
    /// arithmetic means of the members.
    pub fn from_members(x: ArrayView2<'_, T>, members: &[Vec<usize>]) -> Result<Self> {
        let n = x.nrows();
        let mut assignments = vec![usize::MAX; n];
        let mut centroids = Array2::<T>::zeros((members.len(), x.ncols()));
        let mut sizes = Vec::with_capacity(members.len());
        for (h, group) in members.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidParameter(format!("cluster {h} is empty")));
            }
            for &i in group {
                if i >= n || assignments[i] != usize::MAX {
                    return Err(Error::InvalidParameter(format!("point {i} is missing or assigned twice")));
                }
                assignments[i] = h;
                let mut c = centroids.row_mut(h);
                c += &x.row(i);
            }
            let inv = T::one() / T::of_usize(group.len());
            centroids.row_mut(h).mapv_inplace(|v| v * inv);
            sizes.push(group.len());
        }
        if assignments.iter().any(|&a| a == usize::MAX) {
            return Err(Error::InvalidParameter("every point must belong to a cluster".into()));
        }
        Ok(Self { assignments, centroids, sizes })
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn centroids(&self) -> &Array2<T> {
        &self.centroids
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn cluster_count(&self) -> usize {
        self.sizes.len()
    }

    /// Point indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &h) in self.assignments.iter().enumerate() {
            out[h].push(i);
        }
        out
    }
}

/// Result of one 2-means bisection over a subset of points.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMeansSplit<T> {
    /// Positions (into the subset) assigned to each side.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Side means in the metric space.
    pub centroids: [Vec<T>; 2],
    /// Within-split objective after each Lloyd iteration.
    pub objective_trace: Vec<T>,
}

/// Seeded permutation split into halves whose sizes differ by at most one.
pub fn even_random_split(count: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let mut right = perm.split_off(count / 2);
    let mut left = perm;
    left.sort_unstable();
    right.sort_unstable();
    (left, right)
}

fn mean_of<T: Scalar>(y: &Array2<T>, idx: &[usize], sel: impl Fn(usize) -> bool) -> (Vec<T>, usize) {
    let d = y.ncols();
    let mut acc = vec![T::zero(); d];
    let mut count = 0;
    for (pos, &i) in idx.iter().enumerate() {
        if sel(pos) {
            for (a, &v) in acc.iter_mut().zip(y.row(i).iter()) {
                *a += v;
            }
            count += 1;
        }
    }
    if count > 0 {
        let inv = T::one() / T::of_usize(count);
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    (acc, count)
}

/// Top principal direction of the subset (Jacobi on the `d×d` covariance).
fn principal_direction<T: Scalar>(y: &Array2<T>, idx: &[usize]) -> Vec<T> {
    let d = y.ncols();
    let (mu, _) = mean_of(y, idx, |_| true);
    let mut cov = Array2::<T>::zeros((d, d));
    for &i in idx {
        let r = y.row(i);
        for a in 0..d {
            let da = r[a] - mu[a];
            for b in 0..=a {
                cov[[a, b]] += da * (r[b] - mu[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[[b, a]] = cov[[a, b]];
        }
    }
    let (_, vecs) = symmetric_eigen(&cov);
    vecs.column(d - 1).to_vec()
}

/// Lloyd's iteration with k = 2 over rows `idx` of the metric-space matrix.
fn two_means_in_space<T: Scalar>(y: &Array2<T>, idx: &[usize]) -> TwoMeansSplit<T> {
    let count = idx.len();
    debug_assert!(count >= 2);
    let dir = principal_direction(y, idx);
    let proj: Vec<T> = idx
        .iter()
        .map(|&i| y.row(i).iter().zip(&dir).fold(T::zero(), |a, (&v, &w)| a + v * w))
        .collect();
    let (mut lo, mut hi) = (0, 0);
    for (p, &v) in proj.iter().enumerate() {
        if v < proj[lo] {
            lo = p;
        }
        if v > proj[hi] {
            hi = p;
        }
    }
    if lo == hi {
        hi = if lo == 0 { 1 } else { 0 };
    }
    let mut c = [y.row(idx[lo]).to_vec(), y.row(idx[hi]).to_vec()];
    let mut side = vec![false; count]; // true = right
    let mut trace = Vec::new();

    for iter in 0..LLOYD_MAX_ITERS {
        let mut changed = false;
        for (pos, &i) in idx.iter().enumerate() {
            let r = y.row(i);
            let r = r.as_slice().unwrap();
            let right = squared_distance(r, &c[1]) < squared_distance(r, &c[0]);
            changed |= right != side[pos];
            side[pos] = right;
        }
        // keep both sides populated
        let n_right = side.iter().filter(|&&s| s).count();
        if n_right == 0 || n_right == count {
            let from_right = n_right == count;
            let anchor = &c[from_right as usize];
            let mut far = 0;
            let mut best = T::neg_infinity();
            for (pos, &i) in idx.iter().enumerate() {
                let dist = squared_distance(y.row(i).as_slice().unwrap(), anchor);
                if dist > best {
                    best = dist;
                    far = pos;
                }
            }
            side[far] = !from_right;
            changed = true;
        }
        let (c0, _) = mean_of(y, idx, |p| !side[p]);
        let (c1, _) = mean_of(y, idx, |p| side[p]);
        c = [c0, c1];
        let obj = idx.iter().enumerate().fold(T::zero(), |acc, (pos, &i)| {
            acc + squared_distance(y.row(i).as_slice().unwrap(), &c[side[pos] as usize])
        });
        trace.push(obj);
        if !changed && iter > 0 {
            break;
        }
    }

    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (pos, &s) in side.iter().enumerate() {
        if s {
            right.push(pos);
        } else {
            left.push(pos);
        }
    }
    TwoMeansSplit { left, right, centroids: c, objective_trace: trace }
}

/// One 2-means bisection of all rows of `x` under `metric`.
///
/// Initialized deterministically from the two extreme members along the top
/// principal direction, so no seed is involved.
pub fn two_means_split<T: Scalar>(x: ArrayView2<'_, T>, metric: &ClusterMetric<T>) -> Result<TwoMeansSplit<T>> {
    if x.nrows() < 2 {
        return Err(Error::InsufficientData { needed: 2, found: x.nrows() });
    }
    let y = metric.transform(x)?;
    let idx: Vec<usize> = (0..x.nrows()).collect();
    Ok(two_means_in_space(&y, &idx))
}

fn bisect<T: Scalar>(y: &Array2<T>, idx: Vec<usize>, n0: usize, key: u64) -> Vec<Vec<usize>> {
    if 2 * n0 > idx.len() {
        return vec![idx];
    }
    let split = two_means_in_space(y, &idx);
    let (left, right) = if split.left.len().min(split.right.len()) < n0 {
        even_random_split(idx.len(), mix_seed(key, 0))
    } else {
        (split.left, split.right)
    };
    let left: Vec<usize> = left.into_iter().map(|p| idx[p]).collect();
    let right: Vec<usize> = right.into_iter().map(|p| idx[p]).collect();
    let (mut a, b) = if idx.len() >= PARALLEL_THRESHOLD {
        rayon::join(
            || bisect(y, left, n0, mix_seed(key, 1)),
            || bisect(y, right, n0, mix_seed(key, 2)),
        )
    } else {
        (bisect(y, left, n0, mix_seed(key, 1)), bisect(y, right, n0, mix_seed(key, 2)))
    };
    a.extend(b);
    a
}

/// Recursive size-constrained clustering.
///
/// A set with fewer than `2·n0` points is returned as one cluster; larger
/// sets are bisected by 2-means, or evenly at random when 2-means leaves a
/// side with fewer than `n0` points, and both halves recurse. For `n >= n0`
/// every cluster therefore has between `n0` and `2·n0 - 1` points; a root set
/// smaller than `n0` comes back as a single undersized cluster.
pub fn recursive_cluster<T: Scalar>(
    x: ArrayView2<'_, T>,
    n0: usize,
    metric: &ClusterMetric<T>,
    seed: u64,
) -> Result<Clustering<T>> {
    if x.nrows() == 0 {
        return Err(Error::InsufficientData { needed: 1, found: 0 });
    }
    if n0 < 2 {
        return Err(Error::InvalidParameter(format!("minimum cluster size must be at least 2, got {n0}")));
    }
    let y = metric.transform(x)?;
    let leaves = bisect(&y, (0..x.nrows()).collect(), n0, seed);
    Clustering::from_members(x, &leaves)
}

/// Kernel-distance compactness `Σ_h Σ_{i∈h} |1 - k(x_i, z_h)/k(z_h, z_h)|`.
pub fn clustering_objective<T: Scalar>(
    clustering: &Clustering<T>,
    x: ArrayView2<'_, T>,
    params: &RbfHyperparams<T>,
) -> Result<T> {
    check_dims(clustering, x)?;
    if params.dim() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: x.ncols() });
    }
    let half = T::of(0.5);
    Ok(x.rows()
        .into_iter()
        .zip(clustering.assignments())
        .map(|(row, &h)| {
            let z = clustering.centroids.row(h);
            let a = scaled_sq_distance(row.as_slice().unwrap(), z.as_slice().unwrap(), params.length_scales());
            (T::one() - (-a * half).exp()).abs()
        })
        .sum())
}

/// Linear k-means objective `Σ_h Σ_{i∈h} dist(x_i, z_h)` under `metric`.
pub fn kmeans_objective<T: Scalar>(
    clustering: &Clustering<T>,
    x: ArrayView2<'_, T>,
    metric: &ClusterMetric<T>,
) -> Result<T> {
    check_dims(clustering, x)?;
    if let ClusterMetric::RescaledRbf { length_scales } = metric {
        if length_scales.len() != x.ncols() {
            return Err(Error::DimensionMismatch { expected: length_scales.len(), found: x.ncols() });
        }
    }
    Ok(x.rows()
        .into_iter()
        .zip(clustering.assignments())
        .map(|(row, &h)| metric.distance(row.as_slice().unwrap(), clustering.centroids.row(h).as_slice().unwrap()))
        .sum())
}

fn check_dims<T: Scalar>(clustering: &Clustering<T>, x: ArrayView2<'_, T>) -> Result<()> {
    if clustering.assignments.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: clustering.assignments.len(), found: x.nrows() });
    }
    if clustering.centroids.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: clustering.centroids.ncols(), found: x.ncols() });
    }
    Ok(())
}
