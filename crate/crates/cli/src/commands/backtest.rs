use std::fmt::Write;
use std::path::PathBuf;

use lfgp::backtest::{
    alpha_sweep, build_rounds, fit_strategy_models, format_timestamp, parse_timestamp, score_rounds, RateSeries,
    SessionCalendar, StrategyMode, StrategyParams, SweepPoint,
};
use lfgp::mix_seed;

use crate::args::{BacktestArgs, ModeArg};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, require_input, write_atomic, write_text};
use crate::svg::{LineChart, Series};

pub const SUMMARY_HEADER: &str = "mode,alpha,entries,wins,win_rate,total_profit,train_rounds,eval_rounds,dropped_rounds";

#[derive(Debug, Clone)]
pub struct ModeResult {
    pub mode: StrategyMode,
    pub sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone)]
pub struct BacktestOutcome {
    /// First instant of the evaluation window.
    pub boundary: i64,
    pub train_rounds: usize,
    pub eval_rounds: usize,
    /// In-session minutes skipped for stale quotes, over the whole series.
    pub dropped: usize,
    pub results: Vec<ModeResult>,
    pub files: Vec<PathBuf>,
}

fn strategy_params(args: &BacktestArgs) -> CliResult<StrategyParams> {
    let mut p = match &args.strategy {
        Some(path) => {
            require_input(path)?;
            StrategyParams::from_toml_file(path)?
        }
        None => StrategyParams::default(),
    };
    if let Some(v) = args.feature_lag {
        p.feature_lag = v;
    }
    if let Some(v) = args.n0 {
        p.n0 = v;
    }
    if let Some(v) = args.epsilon {
        p.epsilon = v;
    }
    if let Some(v) = args.entry_threshold {
        p.entry_threshold = v;
    }
    if let Some(v) = args.payout {
        p.payout = v;
    }
    if let Some(v) = args.utc_offset {
        p.calendar.utc_offset_hours = v;
    }
    if let Some(v) = args.open_hour {
        p.calendar.open_hour = v;
    }
    if let Some(v) = args.close_hour {
        p.calendar.close_hour = v;
    }
    if let Some(path) = &args.holidays {
        require_input(path)?;
        p.calendar.holidays = SessionCalendar::read_holidays(path)?;
    }
    p.validate()?;
    for &alpha in &args.alpha.0 {
        StrategyParams { alpha, ..p.clone() }.validate()?;
    }
    Ok(p)
}

fn boundary(args: &BacktestArgs, series: &RateSeries) -> CliResult<i64> {
    if let Some(s) = &args.split {
        return Ok(parse_timestamp(s)?);
    }
    let f = args.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(CliError::Usage(format!("--train-fraction must lie in (0, 1), got {f}")));
    }
    let ts = series.timestamps();
    let (first, last) = (ts[0], ts[ts.len() - 1]);
    Ok(first + ((last - first) as f64 * f).round() as i64)
}

/// Strategy models are fitted on rounds settled before the boundary and
/// traded on the rest. Each mode draws its own seed stream, so a mode's
/// results do not depend on which other modes run alongside it.
pub fn cmd_backtest(args: &BacktestArgs) -> CliResult<BacktestOutcome> {
    require_input(&args.rates)?;
    let params = strategy_params(args)?;
    let series = RateSeries::read_csv(&args.rates, &args.instrument, args.pip_size)?;
    if series.is_empty() {
        return Err(CliError::Usage(format!("{} holds no quotes", args.rates.display())));
    }
    let boundary = boundary(args, &series)?;
    let rounds = build_rounds(&series, params.feature_lag, &params.calendar)?;
    rounds.assert_no_lookahead()?;
    let (train, eval) = rounds.split_at(boundary);
    if train.is_empty() || eval.is_empty() {
        return Err(CliError::Usage(format!(
            "split at {} leaves {} training and {} evaluation rounds; both need at least one",
            format_timestamp(boundary),
            train.len(),
            eval.len()
        )));
    }
    eprintln!(
        "{} training rounds, {} evaluation rounds, split at {}, {} rounds dropped for stale quotes",
        train.len(),
        eval.len(),
        format_timestamp(boundary),
        rounds.dropped
    );

    let modes: &[StrategyMode] = match args.mode {
        ModeArg::Proposal => &[StrategyMode::Proposal],
        ModeArg::Baseline => &[StrategyMode::Baseline],
        ModeArg::Both => &[StrategyMode::Proposal, StrategyMode::Baseline],
    };
    let mut results = Vec::with_capacity(modes.len());
    for &mode in modes {
        let p = StrategyParams { mode, ..params.clone() };
        let stream = match mode {
            StrategyMode::Proposal => 0,
            StrategyMode::Baseline => 1,
        };
        let models = fit_strategy_models(&train, &p, mix_seed(args.seed, stream))?;
        let scored = score_rounds(&models, eval.clone())?;
        results.push(ModeResult { mode, sweep: alpha_sweep(&scored, &p, &args.alpha.0)? });
    }

    ensure_dir(&args.out_dir)?;
    let mut files = Vec::new();
    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut chart = LineChart::new("Cumulative profit", "entries", "profit (units staked)");
    for r in &results {
        for point in &r.sweep {
            let ledger = &point.ledger;
            let path = args.out_dir.join(format!("ledger_{}_alpha{}.csv", r.mode, point.alpha));
            write_atomic(&path, |tmp| Ok(ledger.write_csv(tmp)?))?;
            files.push(path);
            let entries = ledger.entry_count();
            let win_rate = if entries == 0 { 0.0 } else { ledger.wins() as f64 / entries as f64 };
            let _ = writeln!(
                summary,
                "{},{},{},{},{:.4},{:.2},{},{},{}",
                r.mode,
                point.alpha,
                entries,
                ledger.wins(),
                win_rate,
                ledger.total_profit(),
                train.len(),
                eval.len(),
                rounds.dropped
            );
            let curve = std::iter::once((0.0, 0.0))
                .chain(ledger.cumulative.iter().enumerate().map(|(k, &c)| ((k + 1) as f64, c)))
                .collect();
            chart.push(Series::new(format!("{} α={}", r.mode, point.alpha), curve));
        }
    }
    let summary_path = args.out_dir.join("summary.csv");
    write_text(&summary_path, &summary)?;
    let plot_path = args.out_dir.join("profit.svg");
    write_text(&plot_path, &chart.render())?;
    files.extend([summary_path, plot_path]);
    print!("{summary}");

    Ok(BacktestOutcome {
        boundary,
        train_rounds: train.len(),
        eval_rounds: eval.len(),
        dropped: rounds.dropped,
        results,
        files,
    })
}
