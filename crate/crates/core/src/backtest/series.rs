use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::{Error, Result};

/// Quotes of one instrument, strictly increasing in time (Unix seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    timestamps: Vec<i64>,
    rates: Vec<f64>,
    pub instrument: String,
    /// Quote-currency units per pip.
    pub pip_size: f64,
}

pub fn format_timestamp(t: i64) -> String {
    DateTime::<Utc>::from_timestamp(t, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| t.to_string())
}

pub fn parse_timestamp(s: &str) -> Result<i64> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|d| d.timestamp())
        .map_err(|e| Error::Format(format!("bad timestamp `{s}`: {e}")))
}

impl RateSeries {
    pub fn new(timestamps: Vec<i64>, rates: Vec<f64>, instrument: impl Into<String>, pip_size: f64) -> Result<Self> {
        if timestamps.len() != rates.len() {
            return Err(Error::DimensionMismatch { expected: timestamps.len(), found: rates.len() });
        }
        if !(pip_size > 0.0 && pip_size.is_finite()) {
            return Err(Error::InvalidParameter(format!("pip size must be positive, got {pip_size}")));
        }
        for i in 0..timestamps.len() {
            if !(rates[i] > 0.0 && rates[i].is_finite()) {
                return Err(Error::DataIntegrity {
                    timestamp: format_timestamp(timestamps[i]),
                    reason: format!("rate {} is not positive", rates[i]),
                });
            }
            if i > 0 && timestamps[i] <= timestamps[i - 1] {
                return Err(Error::DataIntegrity {
                    timestamp: format_timestamp(timestamps[i]),
                    reason: "timestamps are not strictly increasing".into(),
                });
            }
        }
        Ok(Self { timestamps, rates, instrument: instrument.into(), pip_size })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Latest quote at or before `t` that is less than `max_age` seconds
    /// old, as `(quote time, rate)`.
    pub fn as_of(&self, t: i64, max_age: i64) -> Option<(i64, f64)> {
        let idx = self.timestamps.partition_point(|&s| s <= t);
        if idx == 0 {
            return None;
        }
        let ts = self.timestamps[idx - 1];
        (t - ts < max_age).then(|| (ts, self.rates[idx - 1]))
    }

    /// Rate difference in pips, rounded to 0.1 pip.
    pub fn pips(&self, from: f64, to: f64) -> f64 {
        round_tenth((to - from) / self.pip_size)
    }

    /// Reads `timestamp,rate` rows with RFC 3339 timestamps.
    pub fn read_csv(path: &Path, instrument: &str, pip_size: f64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "rate" {
            return Err(Error::Format(format!("{}: expected header `timestamp,rate`", path.display())));
        }
        let mut ts = Vec::new();
        let mut rates = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            ts.push(parse_timestamp(&rec[0])?);
            rates.push(rec[1].trim().parse::<f64>().map_err(|_| {
                Error::Format(format!("{}: row {}: `{}` is not a rate", path.display(), line + 2, &rec[1]))
            })?);
        }
        Self::new(ts, rates, instrument, pip_size)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["timestamp", "rate"])?;
        for (&t, &r) in self.timestamps.iter().zip(&self.rates) {
            w.write_record([format_timestamp(t), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn round_tenth(pips: f64) -> f64 {
    (pips * 10.0).round() / 10.0
}
