//! Offline binary-option backtests on 30-second rate moves: round
//! construction from quote series, fitting of the High/Low models, the
//! stressed entry rule, and profit accounting.

mod calendar;
mod rounds;
mod series;
mod strategy;
mod synth;

pub use calendar::SessionCalendar;
pub use rounds::{build_rounds, Rounds, HORIZON_S};
pub use series::{format_timestamp, parse_timestamp, RateSeries};
pub use strategy::{
    alpha_sweep, apply_strategy, decide, fit_strategy_models, high_percentile, low_percentile, run_backtest,
    score_rounds, settle, stress_quantiles, BacktestLedger, LedgerEntry, Outcome, ScoredRounds, Side,
    StrategyFile, StrategyModels, StrategyMode, StrategyParams, SweepPoint, STRATEGY_FILE_VERSION,
};
pub use synth::{synth_rates, SynthConfig};
