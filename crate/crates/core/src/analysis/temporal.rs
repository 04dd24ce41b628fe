use std::fmt;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How dated sentences are grouped in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// January–June and July–December.
    HalfYear,
    /// ISO-8601 weeks.
    Week,
    /// Before / after a date; the date itself is after.
    Event(NaiveDate),
}

impl Binning {
    pub fn bin(&self, date: NaiveDate) -> Period {
        match *self {
            Binning::HalfYear => Period::HalfYear { year: date.year(), half: if date.month() <= 6 { 1 } else { 2 } },
            Binning::Week => {
                let w = date.iso_week();
                Period::Week { year: w.year(), week: w.week() }
            }
            Binning::Event(event) => {
                if date < event {
                    Period::Before
                } else {
                    Period::After
                }
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "half_year" | "half-year" | "halfyear" => Ok(Binning::HalfYear),
            "week" | "weekly" => Ok(Binning::Week),
            _ => Err(Error::invalid("bin", format!("unknown binning `{s}` (half_year or week)"))),
        }
    }
}

/// A time bin. Orders chronologically within one binning scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Period {
    HalfYear { year: i32, half: u8 },
    Week { year: i32, week: u32 },
    Before,
    After,
}

impl Period {
    /// The following bin of the same scheme, if the scheme is sequential.
    pub fn next(&self) -> Option<Period> {
        match *self {
            Period::HalfYear { year, half: 1 } => Some(Period::HalfYear { year, half: 2 }),
            Period::HalfYear { year, .. } => Some(Period::HalfYear { year: year + 1, half: 1 }),
            Period::Week { year, week } => {
                let monday = NaiveDate::from_isoywd_opt(year, week, Weekday::Mon)?;
                Some(Binning::Week.bin(monday + Duration::days(7)))
            }
            Period::Before => Some(Period::After),
            Period::After => None,
        }
    }

    /// First day of the bin, where defined.
    pub fn start(&self) -> Option<NaiveDate> {
        match *self {
            Period::HalfYear { year, half } => NaiveDate::from_ymd_opt(year, if half == 1 { 1 } else { 7 }, 1),
            Period::Week { year, week } => NaiveDate::from_isoywd_opt(year, week, Weekday::Mon),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::invalid("period", format!("unrecognized period `{s}`"));
        match s {
            "before" => return Ok(Period::Before),
            "after" => return Ok(Period::After),
            _ => {}
        }
        let (y, rest) = s.split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        if let Some(h) = rest.strip_prefix('H') {
            let half: u8 = h.parse().map_err(|_| bad())?;
            if half == 1 || half == 2 {
                return Ok(Period::HalfYear { year, half });
            }
        } else if let Some(w) = rest.strip_prefix('W') {
            let week: u32 = w.parse().map_err(|_| bad())?;
            if NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).is_some() {
                return Ok(Period::Week { year, week });
            }
        }
        Err(bad())
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::HalfYear { year, half } => write!(f, "{year}-H{half}"),
            Period::Week { year, week } => write!(f, "{year}-W{week:02}"),
            Period::Before => f.write_str("before"),
            Period::After => f.write_str("after"),
        }
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Period::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Every bin from `first` to `last` inclusive.
pub fn period_range(first: Period, last: Period) -> Vec<Period> {
    let mut out = vec![first];
    let mut cur = first;
    while cur < last {
        match cur.next() {
            Some(n) => {
                out.push(n);
                cur = n;
            }
            None => break,
        }
    }
    out
}
