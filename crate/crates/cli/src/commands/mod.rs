mod backtest;
mod bench;
mod fit;
mod generate;
mod predict;
mod synth;

use std::path::Path;

use ndarray::Array2;

pub use backtest::{cmd_backtest, BacktestOutcome, ModeResult, SUMMARY_HEADER};
pub use bench::{cmd_bench, BenchRow, BENCH_HEADER};
pub use fit::{cmd_fit, FitOutcome};
pub use generate::cmd_generate;
pub use predict::{cmd_predict, PredictOutcome};
pub use synth::cmd_synth_rates;

use crate::args::{Cli, Command};
use crate::error::CliResult;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a).map(drop),
        Command::Fit(a) => cmd_fit(&a).map(drop),
        Command::Predict(a) => cmd_predict(&a).map(drop),
        Command::Bench(a) => cmd_bench(&a).map(drop),
        Command::Backtest(a) => cmd_backtest(&a).map(drop),
        Command::SynthRates(a) => cmd_synth_rates(&a).map(drop),
    }
}

/// Reads a headed CSV in which every column is a feature.
pub(crate) fn read_matrix(path: &Path) -> CliResult<Array2<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(lfgp::Error::from)?;
    let d = r.headers().map_err(lfgp::Error::from)?.len();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(lfgp::Error::from)?;
        for field in rec.iter() {
            values.push(field.trim().parse::<f64>().map_err(|_| {
                lfgp::Error::Format(format!("{}: row {}: `{field}` is not a number", path.display(), line + 2))
            })?);
        }
    }
    let n = values.len() / d.max(1);
    Ok(Array2::from_shape_vec((n, d), values).map_err(|e| lfgp::Error::Format(e.to_string()))?)
}
