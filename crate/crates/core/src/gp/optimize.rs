use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kernel::{JitterPolicy, RbfHyperparams};
use super::likelihood::lml_and_gradient;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    /// Perturbed starts in addition to the initial point.
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Half-width, in natural-log units, of the uniform start perturbation.
    pub perturbation: f64,
    /// Half-width of the box around the initial log-parameters.
    pub log_bound: f64,
    pub jitter: JitterPolicy,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_iters: 200,
            grad_tol: 1e-6,
            perturbation: 10f64.ln(),
            log_bound: 1e6f64.ln(),
            jitter: JitterPolicy::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum<T> {
    pub params: RbfHyperparams<T>,
    pub lml: T,
    /// Jitter relative to the amplitude at which `lml` was evaluated.
    pub rel_jitter: f64,
    pub initial_lml: T,
}

struct Eval<T> {
    f: T,
    grad: Array1<T>,
    rel_jitter: f64,
}

fn evaluate<T: Scalar>(
    y: &[T],
    z: ArrayView2<'_, T>,
    noise: Option<&[T]>,
    log_params: &Array1<T>,
    policy: &JitterPolicy,
) -> Option<Eval<T>> {
    let params = RbfHyperparams::from_log(log_params.as_slice().unwrap()).ok()?;
    for rel in policy.ladder() {
        if let Ok((f, g)) = lml_and_gradient(y, z, &params, T::of(rel), noise) {
            if f.is_finite() && g.iter().all(|v| v.is_finite()) {
                return Some(Eval { f, grad: Array1::from(g), rel_jitter: rel });
            }
        }
    }
    None
}

/// Maximizes the log marginal likelihood over `(log C, log l)` with BFGS
/// from the initial point and `restarts` log-uniform perturbations of it.
///
/// `noise` holds optional fixed variances added to the kernel diagonal.
/// The result is never worse than the initial point's objective.
pub fn optimize_hyperparams<T: Scalar>(
    y: &[T],
    z: ArrayView2<'_, T>,
    noise: Option<&[T]>,
    init: &RbfHyperparams<T>,
    opts: &OptimizerOptions,
) -> Result<Optimum<T>> {
    let m = z.nrows();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: y.len() });
    }
    if let Some(noise) = noise {
        if noise.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: noise.len() });
        }
    }
    if z.ncols() != init.dim() {
        return Err(Error::DimensionMismatch { expected: init.dim(), found: z.ncols() });
    }
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, found: m });
    }

    let center = Array1::from(init.to_log());
    let bound = T::of(opts.log_bound);
    let lower = center.mapv(|c| c - bound);
    let upper = center.mapv(|c| c + bound);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![center.clone()];
    for _ in 0..opts.restarts {
        starts.push(center.mapv(|c| c + T::of(rng.random_range(-opts.perturbation..=opts.perturbation))));
    }

    let results: Vec<Option<(Array1<T>, Eval<T>, T)>> = starts
        .par_iter()
        .map(|s| {
            let first = evaluate(y, z, noise, s, &opts.jitter)?;
            let f0 = first.f;
            let (x, e) = bfgs(y, z, noise, s.clone(), first, &lower, &upper, opts);
            Some((x, e, f0))
        })
        .collect();

    let initial_lml = results.first().and_then(|r| r.as_ref()).map(|r| r.2);
    let best = results
        .into_iter()
        .flatten()
        .fold(None::<(Array1<T>, Eval<T>, T)>, |best, cand| match best {
            Some(b) if b.1.f >= cand.1.f => Some(b),
            _ => Some(cand),
        });
    let (x, e, _) = best.ok_or(Error::IllConditioned { jitter: opts.jitter.max * init.amplitude().as_f64() })?;
    Ok(Optimum {
        params: RbfHyperparams::from_log(x.as_slice().unwrap())?,
        lml: e.f,
        rel_jitter: e.rel_jitter,
        initial_lml: initial_lml.unwrap_or(T::neg_infinity()),
    })
}

fn clamp<T: Scalar>(x: &Array1<T>, lower: &Array1<T>, upper: &Array1<T>) -> Array1<T> {
    Array1::from_iter(x.iter().zip(lower).zip(upper).map(|((&v, &lo), &hi)| v.max(lo).min(hi)))
}

/// Ascent with a dense inverse-Hessian BFGS update and Armijo backtracking.
/// Every accepted step strictly increases the objective.
#[allow(clippy::too_many_arguments)]
fn bfgs<T: Scalar>(
    y: &[T],
    z: ArrayView2<'_, T>,
    noise: Option<&[T]>,
    mut x: Array1<T>,
    mut cur: Eval<T>,
    lower: &Array1<T>,
    upper: &Array1<T>,
    opts: &OptimizerOptions,
) -> (Array1<T>, Eval<T>) {
    let n = x.len();
    let mut h = Array2::<T>::eye(n);
    let c1 = T::of(1e-4);
    let grad_tol = T::of(opts.grad_tol);

    for _ in 0..opts.max_iters {
        let gmax = cur.grad.iter().fold(T::zero(), |a, g| a.max(g.abs()));
        if gmax <= grad_tol {
            break;
        }
        let mut reset = false;
        let step = loop {
            // ascent direction
            let mut dir = h.dot(&cur.grad);
            if dir.dot(&cur.grad) <= T::zero() {
                h = Array2::eye(n);
                dir = cur.grad.clone();
            }
            // keep the first trial step modest in log space
            let dmax = dir.iter().fold(T::zero(), |a, d| a.max(d.abs()));
            let mut t = if dmax > T::of(2.0) { T::of(2.0) / dmax } else { T::one() };
            let mut accepted = None;
            for _ in 0..40 {
                let trial = clamp(&(&x + &(&dir * t)), lower, upper);
                let moved = &trial - &x;
                if moved.iter().all(|v| *v == T::zero()) {
                    break;
                }
                if let Some(e) = evaluate(y, z, noise, &trial, &opts.jitter) {
                    if e.f > cur.f && e.f >= cur.f + c1 * cur.grad.dot(&moved) {
                        accepted = Some((trial, e));
                        break;
                    }
                }
                t *= T::of(0.5);
            }
            match accepted {
                Some(a) => break Some(a),
                None if !reset => {
                    reset = true;
                    h = Array2::eye(n);
                }
                None => break None,
            }
        };
        let Some((x_new, e_new)) = step else { break };

        let s = &x_new - &x;
        // minimization form: gradient of -f
        let yv = &cur.grad - &e_new.grad;
        let sy = s.dot(&yv);
        let improvement = e_new.f - cur.f;
        x = x_new;
        let prev_f = cur.f;
        cur = e_new;
        if sy > T::of(1e-12) * (s.dot(&s) * yv.dot(&yv)).sqrt() {
            let rho = T::one() / sy;
            let hy = h.dot(&yv);
            let yhy = yv.dot(&hy);
            for i in 0..n {
                for j in 0..n {
                    h[[i, j]] = h[[i, j]] - rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if improvement <= T::of(1e-12) * (T::one() + prev_f.abs()) {
            break;
        }
    }
    (x, cur)
}
