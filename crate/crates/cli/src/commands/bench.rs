use std::fmt::Write;

use lfgp::datasets::generate_dataset;
use lfgp::{fit, mix_seed, FitConfig, FitReport};

use crate::args::BenchArgs;
use crate::error::{CliError, CliResult};
use crate::output::write_text;

pub const BENCH_HEADER: &str = "n,n0,reps,time_mean_s,time_sd_s,repetition_mean,repetition_sd";

/// Mean and standard deviation over the repetitions of one `(n, n0)` cell.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub n0: usize,
    pub reps: usize,
    pub time_mean: f64,
    pub time_sd: f64,
    pub rep_mean: f64,
    pub rep_sd: f64,
    pub reports: Vec<FitReport>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl BenchRow {
    fn from_reports(n: usize, n0: usize, reports: Vec<FitReport>) -> Self {
        let times: Vec<f64> = reports.iter().map(|r| r.wall_time_s).collect();
        let rounds: Vec<f64> = reports.iter().map(|r| r.repetition_count as f64).collect();
        let (time_mean, time_sd) = mean_sd(&times);
        let (rep_mean, rep_sd) = mean_sd(&rounds);
        Self { n, n0, reps: reports.len(), time_mean, time_sd, rep_mean, rep_sd, reports }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.3},{:.3},{:.2},{:.2}",
            self.n, self.n0, self.reps, self.time_mean, self.time_sd, self.rep_mean, self.rep_sd
        )
    }
}

/// Every `(n, n0)` cell is fitted on the same `reps` datasets, the `r`-th
/// drawn with seed `mix_seed(seed, r)`, so cells differ only in `n0`.
pub fn cmd_bench(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let (ns, n0s) = (&args.n.0, &args.n0.0);
    let mut rows = Vec::with_capacity(ns.len() * n0s.len());
    for &n in ns {
        let mut cells: Vec<Vec<FitReport>> = vec![Vec::with_capacity(args.reps); n0s.len()];
        for rep in 0..args.reps {
            let seed = mix_seed(args.seed, rep as u64);
            let data = generate_dataset(args.kind, n, seed)?;
            for (cell, &n0) in cells.iter_mut().zip(n0s) {
                let config = FitConfig::new(n0, args.epsilon, args.statistic).with_seed(seed);
                let (_, report) = fit(data.x.view(), data.y.view(), &config)?;
                eprintln!(
                    "n={n} n0={n0} rep {}/{}: {:.2} s, {} rounds, m={}",
                    rep + 1,
                    args.reps,
                    report.wall_time_s,
                    report.repetition_count,
                    report.cluster_count
                );
                cell.push(report);
            }
        }
        rows.extend(n0s.iter().zip(cells).map(|(&n0, reports)| BenchRow::from_reports(n, n0, reports)));
    }

    let mut table = format!("{BENCH_HEADER}\n");
    for row in &rows {
        let _ = writeln!(table, "{}", row.csv_row());
    }
    if let Some(path) = &args.out {
        write_text(path, &table)?;
    }
    if let Some(path) = &args.raw {
        let mut raw = format!("{}\n", FitReport::CSV_HEADER);
        for report in rows.iter().flat_map(|r| &r.reports) {
            let _ = writeln!(raw, "{}", report.csv_row());
        }
        write_text(path, &raw)?;
    }
    print!("{table}");
    Ok(rows)
}
