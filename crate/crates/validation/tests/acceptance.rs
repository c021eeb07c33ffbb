//! Acceptance suite. Each criterion prints one PASS or FAIL line; the
//! process fails if any criterion does. Pass criterion numbers as arguments
//! to run a subset.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use lfgp::backtest::{
    alpha_sweep, apply_strategy, build_rounds, fit_strategy_models, score_rounds, synth_rates, Rounds, ScoredRounds,
    Side, StrategyMode, StrategyParams, SynthConfig,
};
use lfgp::clustering::clustering_objective;
use lfgp::datasets::{gen_cube, gen_roll, test_grid, true_curve, Generator};
use lfgp::gp::{kernel_matrix, lml_and_gradient, log_marginal_likelihood, posterior_predict, rbf_kernel, scaled_sq_distance};
use lfgp::persist::model_to_json;
use lfgp::{
    estimate_statistic, fit, fit_embedded, mix_seed, predict_batch, recursive_cluster, ClusterMetric, ClusterMode,
    EmbeddingConfig, EmbeddingMethod, FitConfig, LfgpModel, PosteriorPrediction, RbfHyperparams, StatisticKind,
};
use lfgp_cli::args::{BacktestArgs, BenchArgs, FitArgs, GenerateArgs, List, ModeArg, PredictArgs, SynthRatesArgs};
use lfgp_cli::commands::{cmd_backtest, cmd_bench, cmd_fit, cmd_generate, cmd_predict, cmd_synth_rates};
use ndarray::{Array1, Array2};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

// ---------------------------------------------------------------------------
// dense reference implementations

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite input")
}

/// Solves `K X = B` in exact rational arithmetic by Gauss-Jordan
/// elimination and returns `X` with the pivots, so that the only rounding
/// is in the inputs.
fn exact_solve(k: &Array2<f64>, rhs: &[Vec<f64>]) -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
    let n = k.nrows();
    let w = n + rhs.len();
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|i| (0..n).map(|j| exact(k[[i, j]])).chain(rhs.iter().map(|b| exact(b[i]))).collect())
        .collect();
    let mut pivots = Vec::with_capacity(n);
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero()).expect("singular matrix");
        a.swap(p, c);
        let piv = a[c][c].clone();
        pivots.push(piv.clone());
        for j in c..w {
            a[c][j] = &a[c][j] / &piv;
        }
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in c..w {
                    let t = &f * &a[c][j];
                    a[i][j] -= t;
                }
            }
        }
    }
    let cols = (0..rhs.len()).map(|r| (0..n).map(|i| a[i][n + r].clone()).collect()).collect();
    (cols, pivots)
}

fn dot_exact(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).fold(BigRational::zero(), |acc, (x, y)| acc + x * y)
}

fn dense_kernel(a: &[f64], b: &[f64], amplitude: f64, l: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(l).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
    amplitude * (-0.5 * r2).exp()
}

struct GpInstance {
    z: Array2<f64>,
    y: Vec<f64>,
    amplitude: f64,
    l: Vec<f64>,
    jitter: f64,
    noise: Option<Vec<f64>>,
    x_star: Vec<f64>,
}

fn gp_instance(seed: u64, with_noise: bool) -> GpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=10);
    let d = rng.random_range(1..=3);
    let amplitude = rng.random_range(0.1f64.ln()..10f64.ln()).exp();
    let l: Vec<f64> = (0..d).map(|_| rng.random_range(0.1f64.ln()..2f64.ln()).exp()).collect();
    let z = Array2::from_shape_fn((m, d), |_| rng.random_range(-1.0..1.0));
    let y = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let noise = with_noise.then(|| (0..m).map(|_| rng.random_range(0.0..0.1) * amplitude).collect());
    let x_star = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
    GpInstance { z, y, amplitude, l, jitter: 1e-8 * amplitude, noise, x_star }
}

/// `(lml, mean, variance)` of the GP on the factorized matrix `k`, each
/// with the scale of the terms it sums, for relative comparisons.
fn dense_gp(g: &GpInstance, k: &Array2<f64>) -> [(f64, f64); 3] {
    let m = g.z.nrows();
    let ks: Vec<f64> = (0..m).map(|s| dense_kernel(&g.x_star, g.z.row(s).as_slice().unwrap(), g.amplitude, &g.l)).collect();
    let (sol, pivots) = exact_solve(k, &[g.y.clone(), ks.clone()]);
    let y: Vec<BigRational> = g.y.iter().map(|&v| exact(v)).collect();
    let ks_exact: Vec<BigRational> = ks.iter().map(|&v| exact(v)).collect();
    let quad = dot_exact(&y, &sol[0]).to_f64().unwrap();
    let log_det: f64 = pivots.iter().map(|p| p.to_f64().unwrap().abs().ln()).sum();
    let c = m as f64 * (2.0 * std::f64::consts::PI).ln();
    let lml = -0.5 * (quad + log_det + c);
    let mean = dot_exact(&ks_exact, &sol[0]).to_f64().unwrap();
    let mean_scale: f64 = ks.iter().zip(&sol[0]).map(|(a, b)| (a * b.to_f64().unwrap()).abs()).sum();
    let reduction = dot_exact(&ks_exact, &sol[1]).to_f64().unwrap();
    [
        (lml, 0.5 * (quad.abs() + log_det.abs() + c)),
        (mean, mean_scale.max(f64::MIN_POSITIVE)),
        (g.amplitude - reduction, g.amplitude + reduction.abs()),
    ]
}

fn rel_err(got: f64, (want, scale): (f64, f64)) -> f64 {
    (got - want).abs() / scale.max(want.abs())
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_entry = 0.0f64;
    for i in 0..200u64 {
        let g = gp_instance(mix_seed(1, i), i % 2 == 1);
        let params = RbfHyperparams::new(g.amplitude, g.l.clone()).map_err(|e| e.to_string())?;
        let mut k = kernel_matrix(g.z.view(), &params, g.jitter);
        if let Some(v) = &g.noise {
            k = k.with_noise(Array1::from(v.clone()));
        }
        // the assembled matrix against the kernel formula, entry by entry
        let m = g.z.nrows();
        let factored = k.jittered();
        for s in 0..m {
            for t in 0..m {
                let mut want = dense_kernel(g.z.row(s).as_slice().unwrap(), g.z.row(t).as_slice().unwrap(), g.amplitude, &g.l);
                if s == t {
                    want += g.jitter + g.noise.as_ref().map_or(0.0, |v| v[s]);
                }
                worst_entry = worst_entry.max((factored[[s, t]] - want).abs() / g.amplitude);
            }
        }
        let want = dense_gp(&g, &factored);
        let model = LfgpModel::new(
            params.clone(),
            g.z.clone(),
            Array1::from(g.y.clone()),
            StatisticKind::Mean,
            g.jitter,
            g.noise.clone().map(Array1::from),
            None,
        )
        .map_err(|e| e.to_string())?;
        let p = posterior_predict(&g.x_star, &model).map_err(|e| e.to_string())?;
        let lml = log_marginal_likelihood(&g.y, &k).map_err(|e| e.to_string())?;
        for err in [
            rel_err(model.log_marginal_likelihood(), want[0]),
            rel_err(lml, want[0]),
            rel_err(p.mean, want[1]),
            rel_err(p.variance, want[2]),
        ] {
            worst = worst.max(err);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-8 && worst_entry <= 1e-14 && secs < 10.0,
        format!("200 instances, max relative error {worst:.2e} (limit 1e-8), kernel entries within {worst_entry:.1e}, {secs:.2} s"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(2, i));
        let m = rng.random_range(2..=10);
        let d = rng.random_range(1..=3);
        let z = Array2::from_shape_fn((m, d), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let theta: Vec<f64> = std::iter::once(rng.random_range(-1.0..1.0))
            .chain((0..d).map(|_| rng.random_range(-1.5..0.5)))
            .collect();
        let lml = |t: &[f64]| -> f64 {
            let p = RbfHyperparams::from_log(t).unwrap();
            lml_and_gradient(&y, z.view(), &p, 1e-8, None).unwrap().0
        };
        let p = RbfHyperparams::from_log(&theta).map_err(|e| e.to_string())?;
        let (_, grad) = lml_and_gradient(&y, z.view(), &p, 1e-8, None).map_err(|e| e.to_string())?;
        // central differences at h and h/2, Richardson-extrapolated: the
        // truncation error is O(h⁴) while rounding stays at eps·|L|/h
        let central = |j: usize, h: f64| {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[j] += h;
            down[j] -= h;
            (lml(&up) - lml(&down)) / (2.0 * h)
        };
        let h = 1e-3;
        let fd: Vec<f64> = (0..theta.len()).map(|j| (4.0 * central(j, h / 2.0) - central(j, h)) / 3.0).collect();
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(1e-12));
    }
    check(worst <= 1e-4, format!("20 points, max relative gradient error {worst:.2e} (limit 1e-4)"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut violations = Vec::new();
    let mut largest = 0;
    for run in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(3, run));
        let n0 = if run % 2 == 0 { 100 } else { 1000 };
        let n = if run < 2 { 100_000 } else { (rng.random_range((n0 as f64).ln()..100_000f64.ln())).exp() as usize };
        let d = rng.random_range(1..=4);
        let x = match run % 3 {
            0 => Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0)),
            // a few tight blobs
            1 => {
                let centers: Vec<f64> = (0..4 * d).map(|_| rng.random_range(-5.0..5.0)).collect();
                Array2::from_shape_fn((n, d), |(i, j)| centers[(i % 4) * d + j] + 0.01 * rng.random_range(-1.0..1.0))
            }
            // heavy duplication
            _ => Array2::from_shape_fn((n, d), |(i, _)| (i % 7) as f64),
        };
        let metric = if rng.random_bool(0.5) {
            ClusterMetric::EuclideanBaseline
        } else {
            ClusterMetric::rescaled((0..d).map(|_| rng.random_range(0.1..10.0)).collect()).map_err(|e| e.to_string())?
        };
        let c = recursive_cluster(x.view(), n0, &metric, run).map_err(|e| e.to_string())?;
        largest = largest.max(n);
        let total: usize = c.sizes().iter().sum();
        if total != n || c.sizes().iter().any(|&s| s < n0 || s > 2 * n0 - 1) {
            violations.push(format!("run {run} (n={n}, n0={n0})"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        violations.is_empty() && secs < 60.0,
        format!("100 runs up to n={largest}, {} size violations {violations:?}, {secs:.1} s", violations.len()),
    )
}

fn criterion_4() -> Outcome {
    let mut mismatches = 0;
    let mut objective_err = 0.0f64;
    let mut points = 0;
    for inst in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(4, inst));
        let n = rng.random_range(2..=50);
        let d = rng.random_range(1..=4);
        let k = rng.random_range(2..=6.min(n));
        let l: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..3.0)).collect();
        let amplitude = rng.random_range(0.5..2.0);
        let params = RbfHyperparams::new(amplitude, l.clone()).map_err(|e| e.to_string())?;
        let metric = ClusterMetric::rescaled(l.clone()).map_err(|e| e.to_string())?;
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0));
        let z = Array2::from_shape_fn((k, d), |_| rng.random_range(0.0..1.0));
        for row in x.rows() {
            let xi = row.as_slice().unwrap();
            let brute_a = |h: usize| -> f64 { (0..d).map(|j| ((xi[j] - z[[h, j]]) / l[j]).powi(2)).sum() };
            let zh = |h: usize| z.row(h).to_vec();
            let by_kernel = (0..k)
                .min_by(|&a, &b| {
                    let r = |h: usize| (1.0 - rbf_kernel(xi, &zh(h), &params) / rbf_kernel(&zh(h), &zh(h), &params)).abs();
                    r(a).total_cmp(&r(b))
                })
                .unwrap();
            let by_a = (0..k).min_by(|&a, &b| metric.distance(xi, &zh(a)).total_cmp(&metric.distance(xi, &zh(b)))).unwrap();
            let by_brute = (0..k).min_by(|&a, &b| brute_a(a).total_cmp(&brute_a(b))).unwrap();
            if by_kernel != by_a || by_a != by_brute {
                mismatches += 1;
            }
            points += 1;
        }
        // kernel-distance objective of a real clustering against a direct sum
        let c = recursive_cluster(x.view(), 2.min(n), &metric, inst).map_err(|e| e.to_string())?;
        let got = clustering_objective(&c, x.view(), &params).map_err(|e| e.to_string())?;
        let want: f64 = x
            .rows()
            .into_iter()
            .zip(c.assignments())
            .map(|(r, &h)| {
                let a = scaled_sq_distance(r.as_slice().unwrap(), c.centroids().row(h).as_slice().unwrap(), &l);
                (1.0 - (-0.5 * a).exp()).abs()
            })
            .sum();
        objective_err = objective_err.max((got - want).abs() / want.max(1e-300));
    }
    check(
        mismatches == 0 && objective_err < 1e-12,
        format!("{points} points in 50 instances, {mismatches} assignment mismatches, objective rel. error {objective_err:.1e}"),
    )
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let c = |p: i32| v.iter().map(|x| (x - m).powi(p)).sum::<f64>() / n;
    let (m2, m3, m4) = (c(2), c(3), c(4));
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

fn criterion_5() -> Outcome {
    let (a, b) = (1.5f64, 2.5f64);
    let beta = Beta::new(a, b).unwrap();
    let mu = a / (a + b);
    let sigma = (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cluster_means = |n_h: usize, reps: usize| -> Vec<f64> {
        (0..reps)
            .map(|_| {
                let sample: Vec<f64> = (0..n_h).map(|_| beta.sample(&mut rng)).collect();
                estimate_statistic(&sample, StatisticKind::Mean).unwrap()
            })
            .collect()
    };
    let z: Vec<f64> = cluster_means(1000, 4000).iter().map(|m| (m - mu) / (sigma / 1000f64.sqrt())).collect();
    let (skew, kurt) = moments(&z);

    let sizes = [250usize, 500, 1000, 2000];
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n_h| {
            let means = cluster_means(n_h, 2000);
            let m = means.iter().sum::<f64>() / means.len() as f64;
            let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
            ((n_h as f64).ln(), var.ln())
        })
        .collect();
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
    let slope = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum::<f64>() / pts.iter().map(|p| (p.0 - xm).powi(2)).sum::<f64>();
    check(
        skew.abs() < 0.2 && kurt.abs() < 0.5 && (slope + 1.0).abs() <= 0.15,
        format!("n_h=1000: skew {skew:+.3}, excess kurtosis {kurt:+.3}; log-log variance slope {slope:.3}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let grid = test_grid(Generator::Cube, 30).map_err(|e| e.to_string())?;
    let kinds = [StatisticKind::Mean, StatisticKind::Median, StatisticKind::Variance, StatisticKind::Skew];
    let mut wins = [0usize; 4];
    let mut worst_mean = 0.0f64;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let data = gen_cube(10_000, seed).map_err(|e| e.to_string())?;
        for (k, &kind) in kinds.iter().enumerate() {
            let truth = true_curve(30, kind);
            let score = |mode: ClusterMode| -> Result<f64, String> {
                let config = FitConfig::new(1000, 1.0, kind).with_seed(seed).with_cluster_mode(mode);
                let (model, _) = fit(data.x.view(), data.y.view(), &config).map_err(|e| e.to_string())?;
                let pred: Vec<f64> = predict_batch(&model, grid.view()).map_err(|e| e.to_string())?.iter().map(|p| p.mean).collect();
                Ok(rmse(&pred, &truth))
            };
            let (ours, base) = (score(ClusterMode::Rescaled)?, score(ClusterMode::Euclidean)?);
            if ours < base {
                wins[k] += 1;
            }
            if kind == StatisticKind::Mean {
                worst_mean = worst_mean.max(ours);
            }
            rows.push(format!("seed {seed} {kind}: {ours:.4} vs {base:.4}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    println!("    rmse lfgp vs euclidean baseline: {}", rows.join("; "));
    let summary: Vec<String> = kinds.iter().zip(wins).map(|(k, w)| format!("{k} {w}/5")).collect();
    check(
        wins.iter().all(|&w| w >= 4) && worst_mean <= 0.05 && secs < 300.0,
        format!("wins over baseline: {}; worst mean rmse {worst_mean:.4} (limit 0.05); {secs:.0} s", summary.join(", ")),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let grid = test_grid(Generator::Roll, 30).map_err(|e| e.to_string())?;
    let truth = true_curve(30, StatisticKind::Mean);
    let mut lle_wins = 0;
    let mut isomap_wins = 0;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let data = gen_roll(10_000, seed).map_err(|e| e.to_string())?;
        let config = FitConfig::new(1000, 1.0, StatisticKind::Mean).with_seed(seed);
        let score = |method: EmbeddingMethod| -> Result<f64, String> {
            let emb = EmbeddingConfig::new(method, 50, 2);
            let (model, _) = fit_embedded(data.x.view(), data.y.view(), grid.view(), &emb, &config).map_err(|e| e.to_string())?;
            let pred: Vec<f64> = predict_batch(&model, grid.view()).map_err(|e| e.to_string())?.iter().map(|p| p.mean).collect();
            Ok(rmse(&pred, &truth))
        };
        let plain = score(EmbeddingMethod::None)?;
        let lle = score(EmbeddingMethod::Lle)?;
        let isomap = score(EmbeddingMethod::Isomap)?;
        lle_wins += usize::from(lle < plain);
        isomap_wins += usize::from(isomap < plain);
        rows.push(format!("seed {seed}: none {plain:.4}, lle {lle:.4}, isomap {isomap:.4}"));
    }
    let secs = start.elapsed().as_secs_f64();
    println!("    roll mean rmse: {}", rows.join("; "));
    check(
        lle_wins >= 4 && isomap_wins >= 4 && secs < 600.0,
        format!("LLE beats no embedding {lle_wins}/5, Isomap {isomap_wins}/5; {secs:.0} s"),
    )
}

fn criterion_8() -> Outcome {
    let args = BenchArgs {
        n: List(vec![100_000, 200_000]),
        n0: List(vec![1000, 10_000]),
        reps: 3,
        kind: Generator::Cube,
        statistic: StatisticKind::Mean,
        epsilon: 1.0,
        seed: 0,
        out: None,
        raw: None,
    };
    let rows = cmd_bench(&args).map_err(|e| e.to_string())?;
    let max_rep = rows.iter().flat_map(|r| &r.reports).map(|r| r.repetition_count).max().unwrap_or(0);
    let time = |n: usize, n0: usize| rows.iter().find(|r| r.n == n && r.n0 == n0).map(|r| r.time_mean).unwrap();
    let decreasing = [100_000, 200_000].iter().all(|&n| time(n, 10_000) < time(n, 1000));
    let slowest_small = rows
        .iter()
        .filter(|r| r.n == 100_000 && r.n0 == 1000)
        .flat_map(|r| &r.reports)
        .map(|r| r.wall_time_s)
        .fold(0.0, f64::max);
    let cells: Vec<String> = rows
        .iter()
        .map(|r| format!("({}, {}): {:.2}±{:.2} s, rep {:.1}±{:.1}", r.n, r.n0, r.time_mean, r.time_sd, r.rep_mean, r.rep_sd))
        .collect();
    check(
        max_rep <= 5 && decreasing && slowest_small < 60.0,
        format!("{}; max rep {max_rep}, time decreasing in n0: {decreasing}", cells.join("; ")),
    )
}

fn pred(mean: f64, variance: f64) -> PosteriorPrediction<f64> {
    PosteriorPrediction { mean, variance }
}

// Monday 2019-09-02 00:00 UTC
const MONDAY: i64 = 1_567_382_400;

fn fixture(rows: &[(PosteriorPrediction<f64>, PosteriorPrediction<f64>, f64)]) -> ScoredRounds {
    let n = rows.len();
    let entry_times: Vec<i64> = (1..=n as i64).map(|k| MONDAY + 60 * k).collect();
    let rounds = Rounds {
        features: Array2::zeros((n, 1)),
        targets: rows.iter().map(|r| r.2).collect(),
        latest_feature_quote: entry_times.iter().map(|t| t - 30).collect(),
        entry_quote: entry_times.clone(),
        entry_times,
        dropped: 0,
    };
    ScoredRounds { rounds, high: rows.iter().map(|r| r.0).collect(), low: rows.iter().map(|r| r.1).collect() }
}

/// `(round, side, profit)` of every entry, with the running total checked
/// against sequential summation.
fn ledger_of(scored: &ScoredRounds, mode: StrategyMode, alpha: f64) -> Result<Vec<(usize, Side, f64)>, String> {
    let params = StrategyParams { mode, ..Default::default() };
    let ledger = apply_strategy(scored, &params, alpha).map_err(|e| e.to_string())?;
    let mut total = 0.0;
    let mut out = Vec::new();
    for (e, &c) in ledger.entries.iter().zip(&ledger.cumulative) {
        total += e.profit;
        if c != total {
            return Err(format!("cumulative {c} != {total}"));
        }
        let round = ((e.timestamp - MONDAY) / 60) as usize;
        if e.realized_pips != scored.rounds.targets[round - 1] {
            return Err("realized move differs from the round's target".into());
        }
        out.push((round, e.side, e.profit));
    }
    Ok(out)
}

fn criterion_9() -> Outcome {
    use Side::{High, Low};
    // one standard deviation of stress
    let one_sd = 0.158_655_253_931_457;
    let (win, loss) = (0.95, -1.0);

    let proposal = fixture(&[
        (pred(0.3, 0.0), pred(0.2, 0.0), 0.3),
        (pred(-0.1, 0.0), pred(-0.4, 0.0), -0.2),
        (pred(0.2, 0.0), pred(0.0, 0.0), 0.0),
        (pred(0.05, 0.0), pred(-0.05, 0.0), 1.0),
        (pred(0.3, 0.0), pred(-0.5, 0.0), 0.1),
        (pred(0.4, 0.0), pred(-0.4, 0.0), 0.1),
        (pred(0.0, 0.0), pred(0.0, 0.0), -0.7),
        (pred(0.3, 0.04), pred(0.2, 0.0), 0.5),
        (pred(0.3, 0.09), pred(0.2, 0.0), -0.3),
    ]);
    let want_p5 = vec![(1, High, win), (2, Low, win), (3, High, loss), (5, Low, loss), (6, High, win), (8, High, win), (9, High, loss)];
    let want_p1 = vec![(1, High, win), (2, Low, win), (3, High, loss), (5, Low, loss), (6, High, win), (8, High, win)];

    let baseline = fixture(&[
        (pred(0.6, 0.0), pred(0.3, 0.0), 0.3),
        (pred(0.5, 0.0), pred(0.5, 0.0), 0.4),
        (pred(0.55, 0.0), pred(0.7, 0.0), -0.1),
        (pred(0.7, 0.04), pred(0.2, 0.0), 0.0),
        (pred(0.6, 0.0), pred(0.6, 0.0), -0.4),
    ]);
    let want_b5 = vec![(1, High, win), (3, Low, win), (4, High, loss), (5, High, loss)];
    let want_b1 = vec![(1, High, win), (3, Low, win), (5, High, loss)];

    let fixtures_ok = ledger_of(&proposal, StrategyMode::Proposal, 0.5)? == want_p5
        && ledger_of(&proposal, StrategyMode::Proposal, one_sd)? == want_p1
        && ledger_of(&baseline, StrategyMode::Baseline, 0.5)? == want_b5
        && ledger_of(&baseline, StrategyMode::Baseline, one_sd)? == want_b1;

    // stress sweep on fitted models, over a drifting series so both modes trade
    let drift = SynthConfig { duration_s: 21 * 86_400, drift: 5e-7, ..Default::default() };
    let series = synth_rates(&drift, 9).map_err(|e| e.to_string())?;
    let params = StrategyParams::default();
    let rounds = build_rounds(&series, params.feature_lag, &params.calendar).map_err(|e| e.to_string())?;
    let (train, eval) = rounds.split_at(drift.start + drift.duration_s / 2);
    let alphas = [0.5, 0.4, 0.3, 0.2, 0.1, 0.05];
    let mut sweeps = Vec::new();
    for (stream, mode) in [StrategyMode::Proposal, StrategyMode::Baseline].into_iter().enumerate() {
        let p = StrategyParams { mode, ..params.clone() };
        let models = fit_strategy_models(&train, &p, stream as u64).map_err(|e| e.to_string())?;
        let scored = score_rounds(&models, eval.clone()).map_err(|e| e.to_string())?;
        let counts: Vec<usize> = alpha_sweep(&scored, &p, &alphas)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|s| s.ledger.entry_count())
            .collect();
        sweeps.push((mode, counts));
    }
    let monotone = sweeps.iter().all(|(_, c)| c[0] > 0 && c.windows(2).all(|w| w[1] <= w[0]));

    let year = SynthConfig { duration_s: 365 * 86_400, gap_probability: 1e-4, ..Default::default() };
    let series = synth_rates(&year, 1).map_err(|e| e.to_string())?;
    let rounds = build_rounds(&series, params.feature_lag, &params.calendar).map_err(|e| e.to_string())?;
    let no_lookahead = rounds.assert_no_lookahead().is_ok() && rounds.len() > 250_000;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let deterministic = backtest_twice(dir.path())?;

    let sweep_text: Vec<String> = sweeps.iter().map(|(m, c)| format!("{m} {c:?}")).collect();
    check(
        fixtures_ok && monotone && no_lookahead && deterministic,
        format!(
            "fixture ledgers exact: {fixtures_ok}; entry counts over α {alphas:?}: {}; year of {} rounds ({} dropped) without lookahead: {no_lookahead}; repeat run identical: {deterministic}",
            sweep_text.join(", "),
            rounds.len(),
            rounds.dropped
        ),
    )
}

fn synth_args(out: &Path, seed: u64) -> SynthRatesArgs {
    SynthRatesArgs {
        out: out.to_path_buf(),
        days: 14.0,
        step: 10,
        start: None,
        initial_rate: None,
        volatility: None,
        drift: None,
        pip_size: None,
        gap_probability: Some(0.001),
        gap_seconds: None,
        seed,
    }
}

fn backtest_args(rates: &Path, out_dir: &Path) -> BacktestArgs {
    BacktestArgs {
        rates: rates.to_path_buf(),
        instrument: "GBP/JPY".into(),
        pip_size: 0.01,
        mode: ModeArg::Both,
        alpha: List(vec![0.5, 0.3, 0.1]),
        train_fraction: 0.5,
        split: None,
        strategy: None,
        feature_lag: None,
        n0: None,
        epsilon: None,
        entry_threshold: None,
        payout: None,
        utc_offset: None,
        open_hour: None,
        close_hour: None,
        holidays: None,
        out_dir: out_dir.to_path_buf(),
        seed: 4,
    }
}

fn same_files(a: &Path, b: &Path) -> Result<bool, String> {
    let names = |d: &Path| -> Result<Vec<String>, String> {
        let mut v: Vec<String> = fs::read_dir(d)
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        Ok(v)
    };
    let (na, nb) = (names(a)?, names(b)?);
    Ok(na == nb && na.iter().all(|n| fs::read(a.join(n)).ok() == fs::read(b.join(n)).ok()))
}

fn backtest_twice(dir: &Path) -> Result<bool, String> {
    cmd_synth_rates(&synth_args(&dir.join("r1.csv"), 8)).map_err(|e| e.to_string())?;
    cmd_synth_rates(&synth_args(&dir.join("r2.csv"), 8)).map_err(|e| e.to_string())?;
    let same_rates = fs::read(dir.join("r1.csv")).ok() == fs::read(dir.join("r2.csv")).ok();
    cmd_backtest(&backtest_args(&dir.join("r1.csv"), &dir.join("bt1"))).map_err(|e| e.to_string())?;
    cmd_backtest(&backtest_args(&dir.join("r2.csv"), &dir.join("bt2"))).map_err(|e| e.to_string())?;
    Ok(same_rates && same_files(&dir.join("bt1"), &dir.join("bt2"))?)
}

fn fit_args(data: &Path, model_out: &Path, statistic: StatisticKind, embedding: EmbeddingMethod, n0: usize) -> FitArgs {
    FitArgs {
        data: data.to_path_buf(),
        statistic,
        n0,
        epsilon: 1.0,
        embedding,
        k: 50,
        target_dim: 2,
        grid: None,
        n_star: 30,
        queries: None,
        cluster_mode: lfgp_cli::args::ClusterModeArg::Rescaled,
        noise_free: false,
        max_outer_iters: 20,
        bootstrap_reps: 200,
        seed: 6,
        model_out: model_out.to_path_buf(),
        report: None,
    }
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let mut stages: Vec<(String, bool)> = Vec::new();
    for run in ["a", "b"] {
        let d = root.join(run);
        for (kind, n) in [(Generator::Cube, 10_000), (Generator::Roll, 2000)] {
            cmd_generate(&GenerateArgs { kind, n, seed: 3, out: d.join(format!("{kind}.csv")) }).map_err(|e| e.to_string())?;
        }
        let fits = [
            ("mean", "cube", StatisticKind::Mean, EmbeddingMethod::None, 1000),
            ("skew", "cube", StatisticKind::Skew, EmbeddingMethod::None, 1000),
            ("lle", "roll", StatisticKind::Mean, EmbeddingMethod::Lle, 200),
            ("isomap", "roll", StatisticKind::Median, EmbeddingMethod::Isomap, 200),
        ];
        for (name, data, stat, emb, n0) in fits {
            let args = fit_args(&d.join(format!("{data}.csv")), &d.join(format!("{name}.json")), stat, emb, n0);
            cmd_fit(&args).map_err(|e| e.to_string())?;
        }
        cmd_predict(&PredictArgs {
            model: d.join("mean.json"),
            grid: Some(Generator::Cube),
            n_star: 30,
            queries: None,
            out: d.join("mean_pred.csv"),
            plot: Some(d.join("mean_pred.svg")),
        })
        .map_err(|e| e.to_string())?;
        cmd_predict(&PredictArgs {
            model: d.join("isomap.json"),
            grid: None,
            n_star: 30,
            queries: None,
            out: d.join("isomap_pred.csv"),
            plot: Some(d.join("isomap_pred.svg")),
        })
        .map_err(|e| e.to_string())?;
        // single precision end to end
        let data = gen_cube(5000, 3).map_err(|e| e.to_string())?;
        let x = data.x.mapv(|v| v as f32);
        let y = data.y.mapv(|v| v as f32);
        let (m32, _) = fit(x.view(), y.view(), &FitConfig::<f32>::new(500, 1.0, StatisticKind::Median).with_seed(3))
            .map_err(|e| e.to_string())?;
        fs::write(d.join("f32.json"), model_to_json(&m32).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        fs::create_dir_all(d.join("bt")).map_err(|e| e.to_string())?;
    }
    let (a, b) = (root.join("a"), root.join("b"));
    for name in [
        "cube.csv",
        "cube.csv.meta",
        "roll.csv",
        "mean.json",
        "skew.json",
        "lle.json",
        "isomap.json",
        "mean_pred.csv",
        "mean_pred.svg",
        "isomap_pred.csv",
        "isomap_pred.svg",
        "f32.json",
    ] {
        let same = fs::read(a.join(name)).map_err(|e| e.to_string())? == fs::read(b.join(name)).map_err(|e| e.to_string())?;
        stages.push((name.to_string(), same));
    }
    stages.push(("synth-rates + backtest".into(), backtest_twice(&root.join("bt"))?));

    // timing differs between runs; the fitted outcomes must not
    let bench = |seed| {
        cmd_bench(&BenchArgs {
            n: List(vec![20_000]),
            n0: List(vec![1000, 5000]),
            reps: 2,
            kind: Generator::Cube,
            statistic: StatisticKind::Mean,
            epsilon: 1.0,
            seed,
            out: None,
            raw: None,
        })
        .map(|rows| {
            rows.iter()
                .flat_map(|r| &r.reports)
                .map(|r| (r.cluster_count, r.repetition_count, r.objective_trace.clone()))
                .collect::<Vec<_>>()
        })
        .map_err(|e| e.to_string())
    };
    stages.push(("bench outcomes".into(), bench(2)? == bench(2)?));

    let differing: Vec<&str> = stages.iter().filter(|s| !s.1).map(|s| s.0.as_str()).collect();
    check(
        differing.is_empty(),
        format!("{} stages compared byte for byte, differing: {differing:?}", stages.len()),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "GP posterior and likelihood match a dense inverse", criterion_1),
        (2, "likelihood gradient matches central differences", criterion_2),
        (3, "cluster sizes stay within [n0, 2n0-1]", criterion_3),
        (4, "kernel-distance and rescaled-distance assignments agree", criterion_4),
        (5, "cluster means are asymptotically normal", criterion_5),
        (6, "Cube statistics beat the Euclidean baseline", criterion_6),
        (7, "manifold embeddings help on the Roll", criterion_7),
        (8, "timing table shape", criterion_8),
        (9, "backtest arithmetic and stress monotonicity", criterion_9),
        (10, "every stage is deterministic", criterion_10),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1} s]");
                failed.push(id);
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
