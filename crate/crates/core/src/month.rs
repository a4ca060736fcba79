//! Calendar-month keys and inclusive month windows.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MonthError {
    #[error("invalid month '{0}': expected YYYY-MM")]
    Parse(String),
    #[error("invalid window '{0}': expected YYYY-MM:YYYY-MM with start <= end")]
    Window(String),
}

/// A calendar month. Ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthKey {
    year: i32,
    month: u32,
}

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Result<Self, MonthError> {
        if !(1..=12).contains(&month) {
            return Err(MonthError::Parse(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    pub fn of_date(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn pred(self) -> Self {
        if self.month == 1 {
            Self {
                year: self.year - 1,
                month: 12,
            }
        } else {
            Self {
                year: self.year,
                month: self.month - 1,
            }
        }
    }

    /// Months elapsed since year 0, January. Consecutive months differ by one.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn last_day(self) -> NaiveDate {
        self.succ().first_day().pred_opt().expect("valid month")
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthKey {
    type Err = MonthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (y, m) = s.split_once('-').ok_or_else(|| MonthError::Parse(s.into()))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(MonthError::Parse(s.into()));
        }
        let year = y.parse().map_err(|_| MonthError::Parse(s.into()))?;
        let month = m.parse().map_err(|_| MonthError::Parse(s.into()))?;
        Self::new(year, month).map_err(|_| MonthError::Parse(s.into()))
    }
}

impl TryFrom<String> for MonthKey {
    type Error = MonthError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MonthKey> for String {
    fn from(m: MonthKey) -> String {
        m.to_string()
    }
}

/// Inclusive range of months, `start <= end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthRange {
    start: MonthKey,
    end: MonthKey,
}

impl MonthRange {
    pub fn new(start: MonthKey, end: MonthKey) -> Result<Self, MonthError> {
        if start > end {
            return Err(MonthError::Window(format!("{start}:{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> MonthKey {
        self.start
    }

    pub fn end(&self) -> MonthKey {
        self.end
    }

    pub fn contains(&self, m: MonthKey) -> bool {
        self.start <= m && m <= self.end
    }

    pub fn len(&self) -> usize {
        (self.end.ordinal() - self.start.ordinal() + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn months(&self) -> impl Iterator<Item = MonthKey> {
        let end = self.end;
        std::iter::successors(Some(self.start), move |m| {
            let next = m.succ();
            (next <= end).then_some(next)
        })
    }

    pub fn intersect(&self, other: &MonthRange) -> Option<MonthRange> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        MonthRange::new(start, end).ok()
    }
}

impl fmt::Display for MonthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for MonthRange {
    type Err = MonthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| MonthError::Window(s.into()))?;
        let start = a.parse().map_err(|_| MonthError::Window(s.into()))?;
        let end = b.parse().map_err(|_| MonthError::Window(s.into()))?;
        MonthRange::new(start, end).map_err(|_| MonthError::Window(s.into()))
    }
}

impl TryFrom<String> for MonthRange {
    type Error = MonthError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MonthRange> for String {
    fn from(r: MonthRange) -> String {
        r.to_string()
    }
}
