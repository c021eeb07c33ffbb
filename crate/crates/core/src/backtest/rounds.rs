use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::{RateSeries, SessionCalendar};
use crate::{Error, Result};

pub const HORIZON_S: i64 = 30;

/// Feature/target pairs, one per eligible entry minute.
///
/// Features are the `d` most recent 30-s moves that finished at least 30 s
/// before entry, newest first, in pips. The target is the move from the
/// entry quote to the quote 30 s later.
#[derive(Debug, Clone, PartialEq)]
pub struct Rounds {
    pub entry_times: Vec<i64>,
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    /// Time of the newest quote any feature reads.
    pub latest_feature_quote: Vec<i64>,
    /// Time of the quote the target is measured from.
    pub entry_quote: Vec<i64>,
    /// In-session minutes skipped because a needed quote was stale.
    pub dropped: usize,
}

impl Rounds {
    pub fn len(&self) -> usize {
        self.entry_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entry_times.is_empty()
    }

    pub fn lag(&self) -> usize {
        self.features.ncols()
    }

    /// Checks that every feature quote predates its entry quote.
    pub fn assert_no_lookahead(&self) -> Result<()> {
        for i in 0..self.len() {
            if self.latest_feature_quote[i] >= self.entry_quote[i] || self.entry_quote[i] > self.entry_times[i] {
                return Err(Error::DataIntegrity {
                    timestamp: super::format_timestamp(self.entry_times[i]),
                    reason: "feature window reaches the entry quote".into(),
                });
            }
        }
        Ok(())
    }

    fn select(&self, idx: std::ops::Range<usize>) -> Self {
        Self {
            entry_times: self.entry_times[idx.clone()].to_vec(),
            features: self.features.slice(ndarray::s![idx.clone(), ..]).to_owned(),
            targets: self.targets.slice(ndarray::s![idx.clone()]).to_owned(),
            latest_feature_quote: self.latest_feature_quote[idx.clone()].to_vec(),
            entry_quote: self.entry_quote[idx].to_vec(),
            dropped: 0,
        }
    }

    /// Splits at `boundary`: training rounds are those whose outcome is
    /// settled by then, evaluation rounds enter at or after it. Rounds that
    /// straddle the boundary belong to neither. Dropped counts stay with the
    /// whole series, so both halves report 0.
    pub fn split_at(&self, boundary: i64) -> (Self, Self) {
        let train_end = self.entry_times.partition_point(|&t| t + HORIZON_S <= boundary);
        let eval_start = self.entry_times.partition_point(|&t| t < boundary);
        (self.select(0..train_end), self.select(eval_start..self.len()))
    }

    /// Same rounds with the targets replaced, e.g. by outcome indicators.
    pub fn with_targets(&self, targets: Array1<f64>) -> Self {
        Self { targets, ..self.clone() }
    }
}

/// Builds one round per minute in session from `series` using `lag` moves.
/// Minutes whose feature window or horizon lacks a fresh quote are skipped.
pub fn build_rounds(series: &RateSeries, lag: usize, calendar: &SessionCalendar) -> Result<Rounds> {
    if lag == 0 {
        return Err(Error::InvalidParameter("feature lag must be at least 1".into()));
    }
    calendar.validate()?;
    let ts = series.timestamps();
    let empty = || Rounds {
        entry_times: vec![],
        features: Array2::zeros((0, lag)),
        targets: Array1::zeros(0),
        latest_feature_quote: vec![],
        entry_quote: vec![],
        dropped: 0,
    };
    let (Some(&first), Some(&last)) = (ts.first(), ts.last()) else {
        return Ok(empty());
    };
    let span = HORIZON_S * (lag as i64 + 1);
    let start = (first + span).div_euclid(60) * 60 + 60;
    let end = last - HORIZON_S;
    if start > end {
        return Ok(empty());
    }
    let minutes: Vec<i64> = (start..=end).step_by(60).filter(|&t| calendar.is_open(t)).collect();

    let rows: Vec<Option<(i64, Vec<f64>, f64, i64, i64)>> = minutes
        .par_iter()
        .map(|&t| {
            let (entry_ts, entry) = series.as_of(t, HORIZON_S)?;
            let (_, exit) = series.as_of(t + HORIZON_S, HORIZON_S)?;
            // grid levels at t-30, t-60, …, t-30(d+1)
            let mut levels = Vec::with_capacity(lag + 1);
            let mut newest = i64::MIN;
            for j in 1..=lag + 1 {
                let (q_ts, q) = series.as_of(t - HORIZON_S * j as i64, HORIZON_S)?;
                newest = newest.max(q_ts);
                levels.push(q);
            }
            let feats: Vec<f64> = (0..lag).map(|j| series.pips(levels[j + 1], levels[j])).collect();
            Some((t, feats, series.pips(entry, exit), newest, entry_ts))
        })
        .collect();
    let rows: Vec<_> = rows.into_iter().flatten().collect();
    let n = rows.len();
    let dropped = minutes.len() - n;
    Ok(Rounds {
        entry_times: rows.iter().map(|r| r.0).collect(),
        features: Array2::from_shape_fn((n, lag), |(i, j)| rows[i].1[j]),
        targets: rows.iter().map(|r| r.2).collect(),
        latest_feature_quote: rows.iter().map(|r| r.3).collect(),
        entry_quote: rows.iter().map(|r| r.4).collect(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn always_open() -> SessionCalendar {
        SessionCalendar { utc_offset_hours: 0, open_hour: 0, close_hour: 24, holidays: Default::default() }
    }

    // Monday 2019-09-02 00:00 UTC
    const MONDAY: i64 = 1_567_382_400;

    #[test]
    fn steady_climb() {
        // +0.1 pip every 30 s, quoted every 10 s
        let ts: Vec<i64> = (0..400).map(|k| MONDAY + 10 * k).collect();
        let rates: Vec<f64> = ts.iter().map(|&t| 150.0 + 0.001 * ((t - MONDAY) / 30) as f64).collect();
        let s = RateSeries::new(ts, rates, "GBP/JPY", 0.01).unwrap();
        let r = build_rounds(&s, 3, &always_open()).unwrap();
        assert!(!r.is_empty());
        for i in 0..r.len() {
            assert_eq!(r.features.row(i).to_vec(), vec![0.1, 0.1, 0.1]);
            assert_eq!(r.targets[i], 0.1);
            assert_eq!(r.entry_times[i] % 60, 0);
        }
        r.assert_no_lookahead().unwrap();
    }

    #[test]
    fn gaps_drop_rounds() {
        let mut ts: Vec<i64> = (0..400).map(|k| MONDAY + 10 * k).collect();
        ts.retain(|&t| !(MONDAY + 1800..MONDAY + 1900).contains(&t));
        let n = ts.len();
        let s = RateSeries::new(ts, vec![150.0; n], "GBP/JPY", 0.01).unwrap();
        let r = build_rounds(&s, 2, &always_open()).unwrap();
        // no quote lies in (τ-30, τ] for τ in [1820, 1900)
        let stale = |tau: i64| (MONDAY + 1820..MONDAY + 1900).contains(&tau);
        let reads = |t: i64| (-1..=3).map(move |j| t - HORIZON_S * j);
        for &t in &r.entry_times {
            assert!(reads(t).all(|tau| !stale(tau)), "{t}");
        }
        let full = build_rounds(
            &RateSeries::new((0..400).map(|k| MONDAY + 10 * k).collect(), vec![150.0; 400], "GBP/JPY", 0.01).unwrap(),
            2,
            &always_open(),
        )
        .unwrap();
        let expected = full.entry_times.iter().filter(|&&t| reads(t).all(|tau| !stale(tau))).count();
        assert_eq!(r.len(), expected);
        assert!(expected < full.len());
        assert_eq!(full.dropped, 0);
        assert_eq!(r.dropped, full.len() - r.len());
        assert!(r.targets.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn split_keeps_outcomes_before_boundary() {
        let ts: Vec<i64> = (0..800).map(|k| MONDAY + 10 * k).collect();
        let s = RateSeries::new(ts, vec![150.0; 800], "GBP/JPY", 0.01).unwrap();
        let r = build_rounds(&s, 2, &always_open()).unwrap();
        let boundary = MONDAY + 3600 + 15;
        let (train, eval) = r.split_at(boundary);
        assert!(train.entry_times.iter().all(|&t| t + HORIZON_S <= boundary));
        assert!(eval.entry_times.iter().all(|&t| t >= boundary));
        // the round entering at 3600 settles at 3630 > boundary
        assert_eq!(train.len() + eval.len() + 1, r.len());
        assert_eq!(train.features.nrows(), train.len());
        assert_eq!(eval.targets.len(), eval.len());
    }
}
