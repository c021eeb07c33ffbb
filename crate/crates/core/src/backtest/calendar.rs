use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};

use crate::{Error, Result};

/// Weekday trading windows in a fixed UTC offset. Hours may run past 24;
/// `close_hour = 29` ends the session at 05:00 the next morning.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionCalendar {
    pub utc_offset_hours: i32,
    pub open_hour: u32,
    pub close_hour: u32,
    /// Session dates (local, by opening day) with no trading.
    pub holidays: BTreeSet<NaiveDate>,
}

impl Default for SessionCalendar {
    fn default() -> Self {
        Self { utc_offset_hours: 9, open_hour: 8, close_hour: 29, holidays: BTreeSet::new() }
    }
}

impl SessionCalendar {
    pub fn validate(&self) -> Result<()> {
        if self.open_hour >= self.close_hour || self.close_hour > 48 || self.close_hour - self.open_hour > 24 {
            return Err(Error::InvalidParameter(format!(
                "session hours {}..{} are not a window of at most one day",
                self.open_hour, self.close_hour
            )));
        }
        if self.utc_offset_hours.abs() > 14 {
            return Err(Error::InvalidParameter(format!("UTC offset {} out of range", self.utc_offset_hours)));
        }
        Ok(())
    }

    /// Whether an entry at Unix time `t` falls inside a session.
    pub fn is_open(&self, t: i64) -> bool {
        let local = t + i64::from(self.utc_offset_hours) * 3600;
        let day = local.div_euclid(86_400);
        let secs = local.rem_euclid(86_400);
        let open = i64::from(self.open_hour) * 3600;
        let close = i64::from(self.close_hour) * 3600;
        // the session may have opened today or (for windows past midnight) yesterday
        [(day, secs), (day - 1, secs + 86_400)]
            .into_iter()
            .any(|(d, s)| s >= open && s < close && self.trades_on(d))
    }

    fn trades_on(&self, day: i64) -> bool {
        let Some(date) = NaiveDate::from_ymd_opt(1970, 1, 1)
            .and_then(|epoch| epoch.checked_add_signed(chrono::Duration::days(day)))
        else {
            return false;
        };
        !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.contains(&date)
    }

    /// Reads one `YYYY-MM-DD` date per line; blank lines and `#` comments
    /// are skipped.
    pub fn read_holidays(path: &Path) -> Result<BTreeSet<NaiveDate>> {
        let text = fs::read_to_string(path)?;
        let mut out = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let date = NaiveDate::parse_from_str(line, "%Y-%m-%d")
                .map_err(|e| Error::Format(format!("{}:{}: `{line}`: {e}", path.display(), i + 1)))?;
            out.insert(date);
        }
        Ok(out)
    }
}
