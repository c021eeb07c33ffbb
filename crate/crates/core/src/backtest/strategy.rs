use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{build_rounds, format_timestamp, RateSeries, Rounds, SessionCalendar};
use crate::estimators::StatisticKind;
use crate::gp::{LfgpModel, PosteriorPrediction};
use crate::trainer::{fit, FitConfig};
use crate::{mix_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyMode {
    /// Model the 95/195 and 100/195 percentiles of the 30-s move.
    Proposal,
    /// Model the High and Low outcome probabilities directly.
    Baseline,
}

impl fmt::Display for StrategyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Proposal => "proposal",
            Self::Baseline => "baseline",
        })
    }
}

impl FromStr for StrategyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proposal" => Ok(Self::Proposal),
            "baseline" => Ok(Self::Baseline),
            other => Err(Error::InvalidParameter(format!("unknown strategy mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParams {
    pub alpha: f64,
    pub feature_lag: usize,
    pub n0: usize,
    pub epsilon: f64,
    /// Signals must clear this many pips.
    pub entry_threshold: f64,
    /// Total returned per unit stake on a win.
    pub payout: f64,
    pub mode: StrategyMode,
    pub calendar: SessionCalendar,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            feature_lag: 10,
            n0: 100,
            epsilon: 1.0,
            entry_threshold: 0.05,
            payout: 1.95,
            mode: StrategyMode::Proposal,
            calendar: SessionCalendar::default(),
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.feature_lag == 0 {
            return Err(Error::InvalidParameter("feature lag must be at least 1".into()));
        }
        if !(self.payout > 1.0) {
            return Err(Error::InvalidParameter(format!("payout must exceed 1, got {}", self.payout)));
        }
        if !(self.entry_threshold >= 0.0) {
            return Err(Error::InvalidParameter("entry threshold must be non-negative".into()));
        }
        self.calendar.validate()
    }

    /// Win rate at which the expected profit is zero.
    pub fn breakeven_win_rate(&self) -> f64 {
        1.0 / self.payout
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 0.5], got {alpha}")))
    }
}

/// On-disk strategy configuration (TOML). Unset fields keep their defaults.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFile {
    pub version: u32,
    pub alpha: Option<f64>,
    pub feature_lag: Option<usize>,
    pub n0: Option<usize>,
    pub epsilon: Option<f64>,
    pub entry_threshold: Option<f64>,
    pub payout: Option<f64>,
    pub mode: Option<StrategyMode>,
    pub utc_offset_hours: Option<i32>,
    pub open_hour: Option<u32>,
    pub close_hour: Option<u32>,
    /// Holiday list, relative to the config file's directory.
    pub holidays: Option<PathBuf>,
}

pub const STRATEGY_FILE_VERSION: u32 = 1;

impl StrategyParams {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: StrategyFile =
            toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if file.version != STRATEGY_FILE_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported config version {} (expected {STRATEGY_FILE_VERSION})",
                path.display(),
                file.version
            )));
        }
        let mut p = Self::default();
        if let Some(v) = file.alpha {
            p.alpha = v;
        }
        if let Some(v) = file.feature_lag {
            p.feature_lag = v;
        }
        if let Some(v) = file.n0 {
            p.n0 = v;
        }
        if let Some(v) = file.epsilon {
            p.epsilon = v;
        }
        if let Some(v) = file.entry_threshold {
            p.entry_threshold = v;
        }
        if let Some(v) = file.payout {
            p.payout = v;
        }
        if let Some(v) = file.mode {
            p.mode = v;
        }
        if let Some(v) = file.utc_offset_hours {
            p.calendar.utc_offset_hours = v;
        }
        if let Some(v) = file.open_hour {
            p.calendar.open_hour = v;
        }
        if let Some(v) = file.close_hour {
            p.calendar.close_hour = v;
        }
        if let Some(h) = file.holidays {
            let h = if h.is_relative() { path.parent().unwrap_or(Path::new(".")).join(h) } else { h };
            p.calendar.holidays = SessionCalendar::read_holidays(&h)?;
        }
        p.validate()?;
        Ok(p)
    }
}

/// The pair of fitted models a strategy trades on.
#[derive(Debug, Clone)]
pub struct StrategyModels {
    pub mode: StrategyMode,
    pub high: LfgpModel<f64>,
    pub low: LfgpModel<f64>,
}

pub fn high_percentile() -> StatisticKind {
    StatisticKind::Percentile { q: 95.0 / 195.0 }
}

pub fn low_percentile() -> StatisticKind {
    StatisticKind::Percentile { q: 100.0 / 195.0 }
}

/// Fits the High and Low models on training rounds.
pub fn fit_strategy_models(train: &Rounds, params: &StrategyParams, seed: u64) -> Result<StrategyModels> {
    params.validate()?;
    if train.lag() != params.feature_lag {
        return Err(Error::DimensionMismatch { expected: params.feature_lag, found: train.lag() });
    }
    let config = |kind: StatisticKind, stream: u64| {
        FitConfig::new(params.n0, params.epsilon, kind).with_seed(mix_seed(seed, stream))
    };
    let x = train.features.view();
    let (high, low) = match params.mode {
        StrategyMode::Proposal => (
            fit(x, train.targets.view(), &config(high_percentile(), 1))?.0,
            fit(x, train.targets.view(), &config(low_percentile(), 2))?.0,
        ),
        StrategyMode::Baseline => {
            let t = params.entry_threshold;
            let up: Array1<f64> = train.targets.mapv(|y| if y > t { 1.0 } else { 0.0 });
            let down: Array1<f64> = train.targets.mapv(|y| if y < -t { 1.0 } else { 0.0 });
            (
                fit(x, up.view(), &config(StatisticKind::Mean, 1))?.0,
                fit(x, down.view(), &config(StatisticKind::Mean, 2))?.0,
            )
        }
    };
    Ok(StrategyModels { mode: params.mode, high, low })
}

/// `(f_H*, f_L*)`: the α quantile of the High posterior and the 1-α
/// quantile of the Low posterior.
pub fn stress_quantiles(pred_h: PosteriorPrediction<f64>, pred_l: PosteriorPrediction<f64>, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let z = Normal::standard().inverse_cdf(alpha);
    Ok((pred_h.mean + z * pred_h.variance.max(0.0).sqrt(), pred_l.mean - z * pred_l.variance.max(0.0).sqrt()))
}

/// Lower α quantile of a posterior over a probability.
fn stressed_probability(pred: PosteriorPrediction<f64>, alpha: f64) -> f64 {
    pred.mean + Normal::standard().inverse_cdf(alpha) * pred.variance.max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    High,
    Low,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::High => "High",
            Self::Low => "Low",
        })
    }
}

/// The bet (if any) for one round, with the stressed value behind it.
pub fn decide(
    mode: StrategyMode,
    pred_h: PosteriorPrediction<f64>,
    pred_l: PosteriorPrediction<f64>,
    alpha: f64,
    threshold: f64,
) -> Result<Option<(Side, f64)>> {
    let (high, low) = match mode {
        StrategyMode::Proposal => {
            let (fh, fl) = stress_quantiles(pred_h, pred_l, alpha)?;
            ((fh > threshold).then_some(fh), (fl < -threshold).then_some(fl))
        }
        StrategyMode::Baseline => {
            check_alpha(alpha)?;
            let ph = stressed_probability(pred_h, alpha);
            let pl = stressed_probability(pred_l, alpha);
            ((ph > 0.5).then_some(ph), (pl > 0.5).then_some(pl))
        }
    };
    Ok(match (high, low) {
        (Some(h), Some(l)) => {
            let stronger_high = match mode {
                StrategyMode::Proposal => h.abs() >= l.abs(),
                StrategyMode::Baseline => h >= l,
            };
            Some(if stronger_high { (Side::High, h) } else { (Side::Low, l) })
        }
        (Some(h), None) => Some((Side::High, h)),
        (None, Some(l)) => Some((Side::Low, l)),
        (None, None) => None,
    })
}

/// Posterior predictions of both models at every round.
#[derive(Debug, Clone)]
pub struct ScoredRounds {
    pub rounds: Rounds,
    pub high: Vec<PosteriorPrediction<f64>>,
    pub low: Vec<PosteriorPrediction<f64>>,
}

pub fn score_rounds(models: &StrategyModels, rounds: Rounds) -> Result<ScoredRounds> {
    if rounds.lag() != models.high.dim() || rounds.lag() != models.low.dim() {
        return Err(Error::DimensionMismatch { expected: models.high.dim(), found: rounds.lag() });
    }
    let preds: Vec<(PosteriorPrediction<f64>, PosteriorPrediction<f64>)> = rounds
        .features
        .rows()
        .into_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| {
            let x = row.as_slice().expect("standard layout");
            Ok((models.high.predict(x)?, models.low.predict(x)?))
        })
        .collect::<Result<_>>()?;
    let (high, low) = preds.into_iter().unzip();
    Ok(ScoredRounds { rounds, high, low })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Win,
    Loss,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Win => "win",
            Self::Loss => "loss",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub timestamp: i64,
    pub side: Side,
    /// Stressed quantile (proposal) or probability (baseline).
    pub signal: f64,
    pub realized_pips: f64,
    pub outcome: Outcome,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BacktestLedger {
    pub entries: Vec<LedgerEntry>,
    pub cumulative: Vec<f64>,
}

impl BacktestLedger {
    pub const CSV_HEADER: [&'static str; 7] =
        ["timestamp", "side", "signal", "realized_pips", "outcome", "profit", "cumulative"];

    pub fn push(&mut self, entry: LedgerEntry) {
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.cumulative.push(prev + entry.profit);
        self.entries.push(entry);
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn wins(&self) -> usize {
        self.entries.iter().filter(|e| e.outcome == Outcome::Win).count()
    }

    pub fn total_profit(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(Self::CSV_HEADER)?;
        for (e, c) in self.entries.iter().zip(&self.cumulative) {
            w.write_record([
                format_timestamp(e.timestamp),
                e.side.to_string(),
                e.signal.to_string(),
                e.realized_pips.to_string(),
                e.outcome.to_string(),
                e.profit.to_string(),
                c.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Win iff the realized move is strictly in the bet's direction; a draw
/// loses.
pub fn settle(side: Side, realized_pips: f64, payout: f64) -> (Outcome, f64) {
    let win = match side {
        Side::High => realized_pips > 0.0,
        Side::Low => realized_pips < 0.0,
    };
    if win {
        (Outcome::Win, payout - 1.0)
    } else {
        (Outcome::Loss, -1.0)
    }
}

/// Applies the entry rule at stress `alpha` to already scored rounds.
pub fn apply_strategy(scored: &ScoredRounds, params: &StrategyParams, alpha: f64) -> Result<BacktestLedger> {
    let r = &scored.rounds;
    let mut ledger = BacktestLedger::default();
    let mut prev = i64::MIN;
    for i in 0..r.len() {
        let t = r.entry_times[i];
        if t <= prev || t % 60 != 0 {
            return Err(Error::DataIntegrity {
                timestamp: format_timestamp(t),
                reason: "entry minutes must be whole minutes in increasing order".into(),
            });
        }
        prev = t;
        if let Some((side, signal)) = decide(params.mode, scored.high[i], scored.low[i], alpha, params.entry_threshold)? {
            let (outcome, profit) = settle(side, r.targets[i], params.payout);
            ledger.push(LedgerEntry { timestamp: t, side, signal, realized_pips: r.targets[i], outcome, profit });
        }
    }
    Ok(ledger)
}

/// Builds rounds from `series`, scores them once, and trades at `alpha`.
pub fn run_backtest(series: &RateSeries, models: &StrategyModels, params: &StrategyParams) -> Result<BacktestLedger> {
    params.validate()?;
    let rounds = build_rounds(series, params.feature_lag, &params.calendar)?;
    let scored = score_rounds(models, rounds)?;
    apply_strategy(&scored, params, params.alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub ledger: BacktestLedger,
}

/// Trades the same scored rounds at each stress level.
pub fn alpha_sweep(scored: &ScoredRounds, params: &StrategyParams, alphas: &[f64]) -> Result<Vec<SweepPoint>> {
    alphas
        .iter()
        .map(|&alpha| Ok(SweepPoint { alpha, ledger: apply_strategy(scored, params, alpha)? }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(mean: f64, variance: f64) -> PosteriorPrediction<f64> {
        PosteriorPrediction { mean, variance }
    }

    #[test]
    fn no_stress_at_half() {
        let (h, l) = stress_quantiles(pred(0.3, 4.0), pred(-0.2, 9.0), 0.5).unwrap();
        assert!((h - 0.3).abs() < 1e-12 && (l + 0.2).abs() < 1e-12);
    }

    #[test]
    fn one_sigma_stress() {
        let (h, l) = stress_quantiles(pred(0.3, 1.0), pred(0.0, 1.0), 0.158655253931457).unwrap();
        assert!((h - (0.3 - 1.0)).abs() < 1e-9, "{h}");
        assert!((l - 1.0).abs() < 1e-9, "{l}");
        let (h, _) = stress_quantiles(pred(0.3, 0.0), pred(0.0, 0.0), 0.01).unwrap();
        assert_eq!(h, 0.3);
        assert!(stress_quantiles(pred(0.0, 1.0), pred(0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn draws_lose() {
        assert_eq!(settle(Side::High, 0.0, 1.95), (Outcome::Loss, -1.0));
        assert_eq!(settle(Side::Low, -0.1, 1.95).0, Outcome::Win);
        assert_eq!(settle(Side::High, -0.1, 1.95).0, Outcome::Loss);
    }

    #[test]
    fn stronger_signal_wins_ties() {
        let d = decide(StrategyMode::Proposal, pred(0.3, 0.0), pred(-0.5, 0.0), 0.5, 0.05).unwrap();
        assert_eq!(d, Some((Side::Low, -0.5)));
        let d = decide(StrategyMode::Proposal, pred(0.05, 0.0), pred(0.0, 0.0), 0.5, 0.05).unwrap();
        assert_eq!(d, None);
    }

    #[test]
    fn breakeven() {
        assert!((StrategyParams::default().breakeven_win_rate() - 0.512_820_512_8).abs() < 1e-9);
    }
}
