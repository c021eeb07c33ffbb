//! Alternating fit: cluster in the current length-scale geometry, summarize,
//! re-optimize the kernel hyperparameters, repeat until the likelihood gain
//! drops to `epsilon`.

use std::collections::HashMap;
use std::time::Instant;

use ndarray::{concatenate, s, Array1, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{recursive_cluster, ClusterMetric, Clustering};
use crate::estimators::{cluster_statistics, summarize_clusters, StatisticKind};
use crate::gp::likelihood::lml_from_factor;
use crate::gp::{factorize, optimize_hyperparams, LfgpModel, OptimizerOptions, PosteriorPrediction, RbfHyperparams};
use crate::manifold::{embed, EmbeddingConfig, EmbeddingState};
use crate::{mix_seed, Error, Result, Scalar};

/// Which geometry the clustering step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMode {
    /// Rescale by the current length scales (the LFGP proper).
    #[default]
    Rescaled,
    /// Plain Euclidean k-means, independent of the hyperparameters.
    Euclidean,
}

/// What sits on the kernel diagonal besides the jitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Pseudo-observations are treated as exact.
    NoiseFree,
    /// Each pseudo-observation carries its estimated sampling variance.
    #[default]
    SamplingVariance,
}

#[derive(Debug, Clone)]
pub struct FitConfig<T = f64> {
    pub n0: usize,
    /// Stop once an outer round improves the log marginal likelihood by no
    /// more than this many nats.
    pub epsilon: f64,
    pub statistic: StatisticKind,
    pub init: Option<RbfHyperparams<T>>,
    pub max_outer_iters: usize,
    pub seed: u64,
    pub cluster_mode: ClusterMode,
    pub noise: NoiseModel,
    /// Bootstrap resamples for sampling variances of statistics without a
    /// closed form. With [`NoiseModel::NoiseFree`], 0 skips the diagnostic
    /// variances of the final summary.
    pub bootstrap_reps: usize,
    pub optimizer: OptimizerOptions,
}

impl<T> FitConfig<T> {
    pub fn new(n0: usize, epsilon: f64, statistic: StatisticKind) -> Self {
        Self {
            n0,
            epsilon,
            statistic,
            init: None,
            max_outer_iters: 20,
            seed: 0,
            cluster_mode: ClusterMode::Rescaled,
            noise: NoiseModel::default(),
            bootstrap_reps: 200,
            optimizer: OptimizerOptions::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_cluster_mode(mut self, mode: ClusterMode) -> Self {
        self.cluster_mode = mode;
        self
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n0 < 2 {
            return Err(Error::InvalidParameter(format!("n0 must be at least 2, got {}", self.n0)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter("max_outer_iters must be at least 1".into()));
        }
        if self.noise == NoiseModel::SamplingVariance && self.bootstrap_reps < 2 && self.statistic != StatisticKind::Mean {
            return Err(Error::InvalidParameter("sampling-variance noise needs at least 2 bootstrap resamples".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub d: usize,
    pub n0: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub cluster_count: usize,
    pub repetition_count: usize,
    /// Optimized log marginal likelihood after each outer round.
    pub objective_trace: Vec<f64>,
    pub wall_time_s: f64,
    /// Sampling variances of the final pseudo-observations, when computed.
    pub pseudo_variances: Option<Vec<f64>>,
}

impl FitReport {
    pub const CSV_HEADER: &'static str = "n,d,n0,epsilon,seed,m,repetition_count,wall_time_s,final_lml";

    pub fn final_lml(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{}",
            self.n,
            self.d,
            self.n0,
            self.epsilon,
            self.seed,
            self.cluster_count,
            self.repetition_count,
            self.wall_time_s,
            self.final_lml()
        )
    }
}

fn column_std<T: Scalar>(x: ArrayView2<'_, T>) -> Vec<T> {
    let n = T::of_usize(x.nrows().max(1));
    x.columns()
        .into_iter()
        .map(|c| {
            let mean = c.sum() / n;
            let var = c.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let sd = var.sqrt();
            if sd > T::zero() && sd.is_finite() {
                sd
            } else {
                T::one()
            }
        })
        .collect()
}

fn default_init<T: Scalar>(y_hat: &Array1<T>, z: ArrayView2<'_, T>) -> Result<RbfHyperparams<T>> {
    let m = T::of_usize(y_hat.len());
    let mean = y_hat.sum() / m;
    let var = y_hat.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / m;
    let second = y_hat.iter().map(|&v| v * v).sum::<T>() / m;
    let amplitude = [var, second].into_iter().find(|v| *v > T::zero() && v.is_finite()).unwrap_or(T::one());
    RbfHyperparams::new(amplitude, column_std(z))
}

/// Log marginal likelihood of `y_hat` at `params`, with jitter escalation.
fn lml_at<T: Scalar>(
    y_hat: &Array1<T>,
    z: ArrayView2<'_, T>,
    noise: Option<&Array1<T>>,
    params: &RbfHyperparams<T>,
    opts: &OptimizerOptions,
) -> T {
    match factorize(z, params, noise.map(|v| v.as_slice().unwrap()), &opts.jitter) {
        Ok((_, chol, _)) => lml_from_factor(y_hat.as_slice().unwrap(), &chol).0,
        Err(_) => T::neg_infinity(),
    }
}

struct Round<T> {
    clustering: Clustering<T>,
    y_hat: Array1<T>,
    noise: Option<Array1<T>>,
    params: RbfHyperparams<T>,
    lml: T,
    rel_jitter: f64,
}

/// Share of points on which two partitions agree once each cluster of one
/// is matched to its largest overlap in the other; the smaller of the two
/// directions.
fn partition_agreement(a: &[usize], b: &[usize]) -> f64 {
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&i, &j) in a.iter().zip(b) {
        *joint.entry((i, j)).or_insert(0) += 1;
    }
    let mut best_a: HashMap<usize, usize> = HashMap::new();
    let mut best_b: HashMap<usize, usize> = HashMap::new();
    for (&(i, j), &c) in &joint {
        let e = best_a.entry(i).or_insert(0);
        *e = (*e).max(c);
        let e = best_b.entry(j).or_insert(0);
        *e = (*e).max(c);
    }
    let n = a.len().max(1) as f64;
    let fa = best_a.values().sum::<usize>() as f64 / n;
    let fb = best_b.values().sum::<usize>() as f64 / n;
    fa.min(fb)
}

/// Partitions agreeing on at least this share of points count as the same.
const REVISIT_AGREEMENT: f64 = 0.99;

/// Salt separating the bootstrap streams from the clustering and optimizer
/// streams derived from the same seed.
const BOOTSTRAP_STREAM: u64 = 0x6e6f_6973_6500_0000;

/// Fits an LFGP to `(x, y)` in the original feature space.
pub fn fit<T: Scalar>(x: ArrayView2<'_, T>, y: ArrayView1<'_, T>, config: &FitConfig<T>) -> Result<(LfgpModel<T>, FitReport)> {
    fit_inner(x, y, config, None)
}

/// Embeds the training points together with `queries`, then fits in the
/// embedded space. The model can predict at exactly those query points.
pub fn fit_embedded<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    queries: ArrayView2<'_, T>,
    embedding: &EmbeddingConfig,
    config: &FitConfig<T>,
) -> Result<(LfgpModel<T>, FitReport)> {
    if !embedding.is_active() {
        return fit(x, y, config);
    }
    if queries.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), found: queries.ncols() });
    }
    let n = x.nrows();
    let all = concatenate(Axis(0), &[x, queries]).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let space = embed(all.view(), embedding)?;
    let train = space.points.slice(s![..n, ..]).to_owned();
    let state = EmbeddingState {
        config: embedding.clone(),
        queries: queries.to_owned(),
        embedded_queries: space.points.slice(s![n.., ..]).to_owned(),
    };
    fit_inner(train.view(), y, config, Some(state))
}

fn fit_inner<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    config: &FitConfig<T>,
    embedding: Option<EmbeddingState<T>>,
) -> Result<(LfgpModel<T>, FitReport)> {
    config.validate()?;
    let start = Instant::now();
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n < config.n0 {
        return Err(Error::InsufficientData { needed: config.n0, found: n });
    }
    if d == 0 {
        return Err(Error::InvalidParameter("feature dimension must be at least 1".into()));
    }
    if let Some(init) = &config.init {
        if init.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: init.dim() });
        }
    }
    let y = y.as_standard_layout();
    let y = y.as_slice().unwrap();

    let mut theta: Option<RbfHyperparams<T>> = config.init.clone();
    let mut trace: Vec<f64> = Vec::new();
    let mut last: Option<Round<T>> = None;

    let mut seen_partitions: Vec<Vec<usize>> = Vec::new();

    for round in 0..config.max_outer_iters {
        let reuse = last.as_ref().is_some_and(|r| r.clustering.cluster_count() == 1 || config.cluster_mode == ClusterMode::Euclidean);
        let mut revisited = false;
        let clustering = if reuse {
            last.take().unwrap().clustering
        } else {
            let metric = match config.cluster_mode {
                ClusterMode::Euclidean => ClusterMetric::EuclideanBaseline,
                ClusterMode::Rescaled => {
                    let scales = theta.as_ref().map(|t| t.length_scales().to_vec()).unwrap_or_else(|| column_std(x));
                    ClusterMetric::rescaled(scales)?
                }
            };
            let c = recursive_cluster(x, config.n0, &metric, mix_seed(config.seed, 2 * round as u64))?;
            revisited = seen_partitions.iter().any(|p| partition_agreement(p, c.assignments()) >= REVISIT_AGREEMENT);
            seen_partitions.push(c.assignments().to_vec());
            c
        };
        let (y_hat, noise) = match config.noise {
            NoiseModel::NoiseFree => (cluster_statistics(y, &clustering, config.statistic)?, None),
            NoiseModel::SamplingVariance => {
                let seed = mix_seed(config.seed, BOOTSTRAP_STREAM + round as u64);
                let summary = summarize_clusters(y, &clustering, config.statistic, config.bootstrap_reps, seed)?;
                (summary.estimates, Some(summary.variances))
            }
        };
        let z = clustering.centroids().view();
        let theta_old = match theta.take() {
            Some(t) => t,
            None => default_init(&y_hat, z)?,
        };
        let lml_old = lml_at(&y_hat, z, noise.as_ref(), &theta_old, &config.optimizer);

        let (params, lml, rel_jitter) = if clustering.cluster_count() < 2 {
            // a single pseudo-observation: the amplitude has a closed-form
            // maximizer and the length scales are unidentified
            let sigma2 = noise.as_ref().map_or(T::zero(), |v| v[0]);
            let floor = theta_old.amplitude() * T::of(1e-6);
            let c = (y_hat[0] * y_hat[0] - sigma2).max(floor);
            let p = RbfHyperparams::new(c, theta_old.length_scales().to_vec())?;
            let l = lml_at(&y_hat, z, noise.as_ref(), &p, &config.optimizer);
            (p, l, config.optimizer.jitter.initial)
        } else {
            let mut opts = config.optimizer.clone();
            opts.seed = mix_seed(config.seed, 2 * round as u64 + 1);
            let noise = noise.as_ref().map(|v| v.as_slice().unwrap());
            let opt = optimize_hyperparams(y_hat.as_slice().unwrap(), z, noise, &theta_old, &opts)?;
            (opt.params, opt.lml, opt.rel_jitter)
        };
        trace.push(lml.as_f64());
        let gain = (lml - lml_old).as_f64();
        theta = Some(params.clone());
        let single = clustering.cluster_count() < 2;
        last = Some(Round { clustering, y_hat, noise, params, lml, rel_jitter });
        // a partition seen before means the alternation has entered a cycle
        if !(gain > config.epsilon) || single || revisited {
            break;
        }
    }

    let last = last.expect("at least one outer round runs");
    let jitter = T::of(last.rel_jitter) * last.params.amplitude();
    let pseudo_variances = if let Some(v) = &last.noise {
        Some(v.iter().map(|x| x.as_f64()).collect())
    } else if config.bootstrap_reps > 0 {
        let summary = summarize_clusters(y, &last.clustering, config.statistic, config.bootstrap_reps, mix_seed(config.seed, u64::MAX))?;
        Some(summary.variances.iter().map(|v| v.as_f64()).collect())
    } else {
        None
    };
    let m = last.clustering.cluster_count();
    let model = LfgpModel::new(
        last.params,
        last.clustering.centroids().clone(),
        last.y_hat,
        config.statistic,
        jitter,
        last.noise,
        embedding,
    )?;
    debug_assert!(!last.lml.is_nan());
    let report = FitReport {
        n,
        d,
        n0: config.n0,
        epsilon: config.epsilon,
        seed: config.seed,
        cluster_count: m,
        repetition_count: trace.len(),
        objective_trace: trace,
        wall_time_s: start.elapsed().as_secs_f64(),
        pseudo_variances,
    };
    Ok((model, report))
}

/// Posterior at each row of `x_star`, given in original feature
/// coordinates. With an embedding, every row must be one of the query
/// points the model was fitted with.
pub fn predict_batch<T: Scalar>(model: &LfgpModel<T>, x_star: ArrayView2<'_, T>) -> Result<Vec<PosteriorPrediction<T>>> {
    let rows: Vec<Array1<T>> = match model.embedding() {
        None => x_star.rows().into_iter().map(|r| r.to_owned()).collect(),
        Some(state) => {
            if x_star.nrows() > 0 && x_star.ncols() != state.queries.ncols() {
                return Err(Error::DimensionMismatch { expected: state.queries.ncols(), found: x_star.ncols() });
            }
            x_star
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, r)| {
                    let r = r.to_vec();
                    state.lookup(&r).map(|e| e.to_owned()).ok_or(Error::UnseenPoint { index: i })
                })
                .collect::<Result<_>>()?
        }
    };
    rows.par_iter().map(|r| model.predict(r.as_slice().unwrap())).collect()
}
