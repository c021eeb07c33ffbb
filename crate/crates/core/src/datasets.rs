//! Synthetic Cube and Roll datasets with Beta-distributed responses, the
//! exact statistics of those Beta laws, and CSV storage.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::estimators::StatisticKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    Cube,
    Roll,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cube => "cube",
            Self::Roll => "roll",
        })
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cube" => Ok(Self::Cube),
            "roll" => Ok(Self::Roll),
            other => Err(Error::InvalidParameter(format!("unknown dataset kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    /// `cube`, `roll`, or whatever produced an imported file.
    pub generator: String,
    pub seed: Option<u64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("Beta parameters must be positive, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    /// Law of the `i`-th response (1-based) out of `n`:
    /// `Be((n+i)/n, (4n-3i)/n)`.
    pub fn for_index(i: usize, n: usize) -> Self {
        let (i, n) = (i as f64, n as f64);
        Self { a: (n + i) / n, b: (4.0 * n - 3.0 * i) / n }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.a, self.b, x)
        }
    }

    /// Inverse CDF by bisection to an interval width of 1e-10.
    pub fn quantile(&self, q: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let ga = Gamma::new(self.a, 1.0).expect("validated shape").sample(rng);
        let gb = Gamma::new(self.b, 1.0).expect("validated shape").sample(rng);
        ga / (ga + gb)
    }
}

/// Population value of `kind` under `params`.
pub fn true_statistic(params: BetaParams, kind: StatisticKind) -> f64 {
    let BetaParams { a, b } = params;
    let s = a + b;
    match kind {
        StatisticKind::Mean => a / s,
        StatisticKind::Variance => a * b / (s * s * (s + 1.0)),
        StatisticKind::Skew => 2.0 * (b - a) * (s + 1.0).sqrt() / ((s + 2.0) * (a * b).sqrt()),
        StatisticKind::Median => params.quantile(0.5),
        StatisticKind::Percentile { q } => params.quantile(q),
    }
}

/// True statistic along the evaluation grid of `n_star` points.
pub fn true_curve(n_star: usize, kind: StatisticKind) -> Vec<f64> {
    (1..=n_star).map(|i| true_statistic(BetaParams::for_index(i, n_star), kind)).collect()
}

fn features(kind: Generator, i: usize, n: usize, u: f64) -> [f64; 3] {
    let t = i as f64 / n as f64;
    match kind {
        Generator::Cube => [(2.0 * i as f64 - n as f64) / n as f64, u, u],
        Generator::Roll => {
            let angle = 2.0 * std::f64::consts::PI * t;
            [t * angle.cos(), t * angle.sin(), u]
        }
    }
}

fn generate(kind: Generator, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset size must be at least 1".into()));
    }
    let rows: Vec<([f64; 3], f64)> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut x = features(kind, i, n, 0.0);
            match kind {
                Generator::Cube => {
                    x[1] = rng.random::<f64>();
                    x[2] = rng.random::<f64>();
                }
                Generator::Roll => x[2] = rng.random::<f64>(),
            }
            (x, BetaParams::for_index(i, n).sample(&mut rng))
        })
        .collect();
    let x = Array2::from_shape_fn((n, 3), |(r, c)| rows[r].0[c]);
    let y = rows.iter().map(|r| r.1).collect();
    Ok(Dataset { x, y, meta: DatasetMeta { generator: kind.to_string(), seed: Some(seed), n } })
}

/// `x₁ = (2i-n)/n`, `x₂, x₃ ~ U(0,1)`, `y ~ Be((n+i)/n, (4n-3i)/n)` for
/// `i = 1..n`.
pub fn gen_cube(n: usize, seed: u64) -> Result<Dataset> {
    generate(Generator::Cube, n, seed)
}

/// A planar spiral `(t cos 2πt, t sin 2πt)` with `t = i/n`, lifted by a
/// `U(0,1)` third coordinate; same responses as [`gen_cube`].
pub fn gen_roll(n: usize, seed: u64) -> Result<Dataset> {
    generate(Generator::Roll, n, seed)
}

pub fn generate_dataset(kind: Generator, n: usize, seed: u64) -> Result<Dataset> {
    generate(kind, n, seed)
}

/// Evaluation points: the generator's construction at `i = 1..n_star` with
/// the random coordinates held at 0.5.
pub fn test_grid(kind: Generator, n_star: usize) -> Result<Array2<f64>> {
    if n_star == 0 {
        return Err(Error::InvalidParameter("grid size must be at least 1".into()));
    }
    Ok(Array2::from_shape_fn((n_star, 3), |(r, c)| features(kind, r + 1, n_star, 0.5)[c]))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes `x1,…,xd,y` rows and a `<path>.meta` sidecar.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (row, y) in data.x.rows().into_iter().zip(data.y.iter()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut meta = format!("generator={}\nn={}\n", data.meta.generator, data.meta.n);
    if let Some(seed) = data.meta.seed {
        meta.push_str(&format!("seed={seed}\n"));
    }
    fs::write(sidecar_path(path), meta)?;
    Ok(())
}

/// Reads a dataset written by [`write_csv`] or any CSV whose last column
/// is the response. The sidecar is optional.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Format(format!("{}: need at least one feature column and a response", path.display())));
    }
    let d = header.len() - 1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(Error::Format(format!("{}: row {} has {} fields, expected {}", path.display(), line + 2, rec.len(), d + 1)));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("{}: row {}: `{field}` is not a number", path.display(), line + 2))
            })?;
            if j < d {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let n = ys.len();
    let x = Array2::from_shape_vec((n, d), xs).map_err(|e| Error::Format(e.to_string()))?;
    let mut meta = DatasetMeta { generator: "file".into(), seed: None, n };
    if let Ok(text) = fs::read_to_string(sidecar_path(path)) {
        for line in text.lines() {
            match line.split_once('=') {
                Some(("generator", v)) => meta.generator = v.to_string(),
                Some(("seed", v)) => meta.seed = v.parse().ok(),
                _ => {}
            }
        }
    }
    Ok(Dataset { x, y: Array1::from(ys), meta })
}
