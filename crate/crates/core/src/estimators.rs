//! Per-cluster estimates of the interest statistic and their sampling
//! variances. The estimates become the GP's pseudo-observations; the
//! variances can sit on the kernel diagonal as observation noise.

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::{mix_seed, Error, Result, Scalar};

/// The statistic of the conditional response distribution being modeled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StatisticKind {
    Mean,
    Median,
    Variance,
    Skew,
    Percentile { q: f64 },
}

impl StatisticKind {
    pub fn percentile(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Self::Percentile { q })
        } else {
            Err(Error::InvalidParameter(format!("percentile level must lie in (0, 1), got {q}")))
        }
    }

    /// Smallest sample the estimator is defined on.
    pub fn min_count(&self) -> usize {
        match self {
            Self::Variance => 2,
            Self::Skew => 3,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Percentile { q } => Self::percentile(q).map(|_| ()),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mean => f.write_str("mean"),
            Self::Median => f.write_str("median"),
            Self::Variance => f.write_str("variance"),
            Self::Skew => f.write_str("skew"),
            Self::Percentile { q } => write!(f, "percentile:{q}"),
        }
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    /// Accepts `mean`, `median`, `variance`, `skew`, or `percentile:<q>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            "variance" => Ok(Self::Variance),
            "skew" => Ok(Self::Skew),
            other => {
                let q = other
                    .strip_prefix("percentile:")
                    .and_then(|q| q.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown statistic '{s}'")))?;
                Self::percentile(q)
            }
        }
    }
}

fn cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}

/// k-th order statistic (0-based) and, if it exists, the next one.
fn order_stats<T: Scalar>(buf: &mut [T], k: usize) -> (T, Option<T>) {
    let (_, &mut kth, rest) = buf.select_nth_unstable_by(k, cmp);
    let next = rest.iter().copied().min_by(cmp);
    (kth, next)
}

/// Linear-interpolation empirical quantile at 1-based rank `q(n-1)+1`.
fn quantile<T: Scalar>(values: &[T], q: f64) -> T {
    let n = values.len();
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let frac = T::of(h - lo as f64);
    let mut buf = values.to_vec();
    let (a, b) = order_stats(&mut buf, lo);
    match b {
        Some(b) if frac > T::zero() => a + frac * (b - a),
        _ => a,
    }
}

fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::of_usize(values.len())
}

fn unbiased_variance<T: Scalar>(values: &[T]) -> T {
    let mu = mean(values);
    let ss: T = values.iter().map(|&v| (v - mu) * (v - mu)).sum();
    ss / T::of_usize(values.len() - 1)
}

/// Adjusted Fisher-Pearson skewness `G1 = g1·√(n(n-1))/(n-2)`; zero for a
/// constant sample.
fn skewness<T: Scalar>(values: &[T]) -> T {
    let n = T::of_usize(values.len());
    let mu = mean(values);
    let (m2, m3) = values.iter().fold((T::zero(), T::zero()), |(a, b), &v| {
        let d = v - mu;
        (a + d * d, b + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 <= T::zero() {
        return T::zero();
    }
    let g1 = m3 / m2.powf(T::of(1.5));
    g1 * (n * (n - T::one())).sqrt() / (n - T::of(2.0))
}

/// Point estimate of the statistic over a sample.
pub fn estimate_statistic<T: Scalar>(values: &[T], kind: StatisticKind) -> Result<T> {
    kind.validate()?;
    let needed = kind.min_count();
    if values.len() < needed {
        return Err(Error::InsufficientData { needed, found: values.len() });
    }
    Ok(match kind {
        StatisticKind::Mean => mean(values),
        StatisticKind::Median => {
            let n = values.len();
            let mut buf = values.to_vec();
            if n % 2 == 1 {
                order_stats(&mut buf, n / 2).0
            } else {
                let (a, b) = order_stats(&mut buf, n / 2 - 1);
                (a + b.expect("even sample has an upper middle")) / T::of(2.0)
            }
        }
        StatisticKind::Variance => unbiased_variance(values),
        StatisticKind::Skew => skewness(values),
        StatisticKind::Percentile { q } => quantile(values, q),
    })
}

/// Sampling variance of the estimator: `s²/n` for the mean, a seeded
/// nonparametric bootstrap with `bootstrap_reps` resamples otherwise.
pub fn estimate_variance<T: Scalar>(
    values: &[T],
    kind: StatisticKind,
    bootstrap_reps: usize,
    seed: u64,
) -> Result<T> {
    kind.validate()?;
    if kind == StatisticKind::Mean {
        if values.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, found: values.len() });
        }
        return Ok(unbiased_variance(values) / T::of_usize(values.len()));
    }
    let needed = kind.min_count();
    if values.len() < needed {
        return Err(Error::InsufficientData { needed, found: values.len() });
    }
    if bootstrap_reps == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one resample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut resample = vec![T::zero(); n];
    let mut stats = Vec::with_capacity(bootstrap_reps);
    for _ in 0..bootstrap_reps {
        for slot in resample.iter_mut() {
            *slot = values[rng.random_range(0..n)];
        }
        stats.push(estimate_statistic(&resample, kind)?);
    }
    if stats.len() < 2 {
        return Ok(T::zero());
    }
    Ok(unbiased_variance(&stats))
}

/// Per-cluster pseudo-observations and their diagnostic variances, in
/// cluster-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary<T> {
    pub estimates: Array1<T>,
    pub variances: Array1<T>,
    pub sizes: Vec<usize>,
}

fn group_by_cluster<T: Scalar>(y: &[T], clustering: &Clustering<T>) -> Result<Vec<Vec<T>>> {
    let assignments = clustering.assignments();
    if assignments.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: assignments.len(), found: y.len() });
    }
    let mut groups: Vec<Vec<T>> = clustering.sizes().iter().map(|&s| Vec::with_capacity(s)).collect();
    for (&h, &v) in assignments.iter().zip(y) {
        groups[h].push(v);
    }
    Ok(groups)
}

/// Per-cluster point estimates only, in cluster-id order.
pub fn cluster_statistics<T: Scalar>(y: &[T], clustering: &Clustering<T>, kind: StatisticKind) -> Result<Array1<T>> {
    let groups = group_by_cluster(y, clustering)?;
    let est: Vec<T> = groups.par_iter().map(|vals| estimate_statistic(vals, kind)).collect::<Result<_>>()?;
    Ok(Array1::from(est))
}

/// Groups responses by cluster and applies both estimators to each group.
pub fn summarize_clusters<T: Scalar>(
    y: &[T],
    clustering: &Clustering<T>,
    kind: StatisticKind,
    bootstrap_reps: usize,
    seed: u64,
) -> Result<ClusterSummary<T>> {
    let groups = group_by_cluster(y, clustering)?;
    let per: Vec<(T, T)> = groups
        .par_iter()
        .enumerate()
        .map(|(h, vals)| {
            let est = estimate_statistic(vals, kind)?;
            let var = if vals.len() < 2 {
                T::zero()
            } else {
                estimate_variance(vals, kind, bootstrap_reps, mix_seed(seed, h as u64))?
            };
            Ok((est, var))
        })
        .collect::<Result<_>>()?;
    Ok(ClusterSummary {
        estimates: per.iter().map(|p| p.0).collect(),
        variances: per.iter().map(|p| p.1).collect(),
        sizes: clustering.sizes().to_vec(),
    })
}
