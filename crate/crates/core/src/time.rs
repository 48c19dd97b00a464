//! Calendar timestamps with an explicit granularity.
//!
//! Every timestamp denotes a closed interval of days. A year covers all of its
//! days, a quarter its three months, a date a single day. Comparisons between
//! timestamps of different granularity are defined on those intervals.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Quarter,
    Month,
    Date,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Timestamp {
    granularity: Granularity,
    year: i32,
    /// Quarter (1..=4), month (1..=12) or unused depending on granularity.
    part: u32,
    day: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp `{0}`")]
pub struct TimestampError(pub String);

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

const MONTH_ABBR: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

impl Timestamp {
    pub fn year(year: i32) -> Self {
        Self {
            granularity: Granularity::Year,
            year,
            part: 0,
            day: 0,
        }
    }

    pub fn quarter(year: i32, quarter: u32) -> Option<Self> {
        (1..=4).contains(&quarter).then_some(Self {
            granularity: Granularity::Quarter,
            year,
            part: quarter,
            day: 0,
        })
    }

    pub fn month(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self {
            granularity: Granularity::Month,
            year,
            part: month,
            day: 0,
        })
    }

    pub fn date(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day)?;
        Some(Self {
            granularity: Granularity::Date,
            year,
            part: month,
            day,
        })
    }

    pub fn from_naive(date: NaiveDate) -> Self {
        Self::date(date.year(), date.month(), date.day()).expect("valid naive date")
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn first_day(&self) -> NaiveDate {
        let (m, d) = match self.granularity {
            Granularity::Year => (1, 1),
            Granularity::Quarter => ((self.part - 1) * 3 + 1, 1),
            Granularity::Month => (self.part, 1),
            Granularity::Date => (self.part, self.day),
        };
        NaiveDate::from_ymd_opt(self.year, m, d).expect("timestamp fields validated")
    }

    pub fn last_day(&self) -> NaiveDate {
        match self.granularity {
            Granularity::Year => NaiveDate::from_ymd_opt(self.year, 12, 31).unwrap(),
            Granularity::Quarter => last_of_month(self.year, self.part * 3),
            Granularity::Month => last_of_month(self.year, self.part),
            Granularity::Date => self.first_day(),
        }
    }

    /// Day number of the first day, counted from 0001-01-01.
    pub fn start_ordinal(&self) -> i64 {
        self.first_day().num_days_from_ce() as i64
    }

    pub fn end_ordinal(&self) -> i64 {
        self.last_day().num_days_from_ce() as i64
    }

    /// Midpoint used when a timestamp must be placed on a continuous axis.
    pub fn axis_position(&self) -> f64 {
        (self.start_ordinal() + self.end_ordinal()) as f64 / 2.0
    }

    pub fn contains(&self, other: &Timestamp) -> bool {
        self.start_ordinal() <= other.start_ordinal() && other.end_ordinal() <= self.end_ordinal()
    }

    /// Chronological order on interval starts, then ends.
    pub fn chrono_cmp(&self, other: &Timestamp) -> Ordering {
        self.start_ordinal()
            .cmp(&other.start_ordinal())
            .then(self.end_ordinal().cmp(&other.end_ordinal()))
    }

    /// The next timestamp of the same granularity.
    pub fn succ(&self) -> Self {
        match self.granularity {
            Granularity::Year => Self::year(self.year + 1),
            Granularity::Quarter if self.part == 4 => Self::quarter(self.year + 1, 1).unwrap(),
            Granularity::Quarter => Self::quarter(self.year, self.part + 1).unwrap(),
            Granularity::Month if self.part == 12 => Self::month(self.year + 1, 1).unwrap(),
            Granularity::Month => Self::month(self.year, self.part + 1).unwrap(),
            Granularity::Date => Self::from_naive(self.first_day().succ_opt().expect("date in range")),
        }
    }

    /// Every timestamp from `lo` through `hi` at the granularity of `lo`.
    pub fn series(lo: Timestamp, hi: Timestamp) -> Vec<Timestamp> {
        let mut out = Vec::new();
        let mut t = lo;
        while t.end_ordinal() <= hi.end_ordinal() {
            out.push(t);
            t = t.succ();
        }
        out
    }

    /// Human-readable form used in generated queries, e.g. `Nov 1, 2021`.
    pub fn to_natural(&self) -> String {
        match self.granularity {
            Granularity::Date => format!("{} {}, {}", MONTH_ABBR[(self.part - 1) as usize], self.day, self.year),
            Granularity::Month => format!("{} {}", MONTH_ABBR[(self.part - 1) as usize], self.year),
            _ => self.to_string(),
        }
    }

    /// Parse natural-language dates (`Nov 1, 2021`, `November 1 2021`,
    /// `Jan 2022`) in addition to the canonical forms.
    pub fn parse_natural(text: &str) -> Option<Self> {
        if let Ok(ts) = text.parse() {
            return Some(ts);
        }
        let cleaned = text.replace(',', " ");
        let parts: Vec<&str> = cleaned.split_whitespace().collect();
        let month = parts.first().and_then(|m| month_number(m))?;
        match parts.len() {
            2 => Self::month(parse_year(parts[1])?, month),
            3 => {
                let day: u32 = parts[1]
                    .trim_end_matches(|c: char| c.is_ascii_alphabetic())
                    .parse()
                    .ok()?;
                Self::date(parse_year(parts[2])?, month, day)
            }
            _ => None,
        }
    }
}

pub fn month_number(word: &str) -> Option<u32> {
    let w = word.trim_end_matches('.').to_ascii_lowercase();
    if w.len() < 3 {
        return None;
    }
    MONTHS
        .iter()
        .position(|m| *m == w || (w.len() == 3 && m.starts_with(&w)) || (w == "sept" && *m == "september"))
        .map(|i| i as u32 + 1)
}

fn parse_year(s: &str) -> Option<i32> {
    (s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()))
        .then(|| s.parse().ok())
        .flatten()
}

fn last_of_month(year: i32, month: u32) -> NaiveDate {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(ny, nm, 1).unwrap().pred_opt().unwrap()
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TimestampError(s.to_string());
        let b = s.as_bytes();
        let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
        match b.len() {
            4 if digits(0..4) => Ok(Self::year(s.parse().map_err(|_| err())?)),
            6 if digits(0..4) && (b[4] == b'Q' || b[4] == b'q') && digits(5..6) => {
                Self::quarter(s[..4].parse().map_err(|_| err())?, s[5..].parse().map_err(|_| err())?).ok_or_else(err)
            }
            7 if digits(0..4) && b[4] == b'-' && digits(5..7) => {
                Self::month(s[..4].parse().map_err(|_| err())?, s[5..].parse().map_err(|_| err())?).ok_or_else(err)
            }
            10 if digits(0..4) && b[4] == b'-' && digits(5..7) && b[7] == b'-' && digits(8..10) => Self::date(
                s[..4].parse().map_err(|_| err())?,
                s[5..7].parse().map_err(|_| err())?,
                s[8..].parse().map_err(|_| err())?,
            )
            .ok_or_else(err),
            _ => Err(err()),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.granularity {
            Granularity::Year => write!(f, "{:04}", self.year),
            Granularity::Quarter => write!(f, "{:04}Q{}", self.year, self.part),
            Granularity::Month => write!(f, "{:04}-{:02}", self.year, self.part),
            Granularity::Date => write!(f, "{:04}-{:02}-{:02}", self.year, self.part, self.day),
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn successors_wrap() {
        let t = |s: &str| s.parse::<Timestamp>().unwrap();
        assert_eq!(t("2019Q4").succ(), t("2020Q1"));
        assert_eq!(t("2019-12").succ(), t("2020-01"));
        assert_eq!(t("2020-02-28").succ(), t("2020-02-29"));
        assert_eq!(Timestamp::series(t("2019Q3"), t("2020Q2")).len(), 4);
        assert_eq!(Timestamp::series(t("2021-01-01"), t("2021-03-31")).len(), 90);
    }

    #[test]
    fn canonical_forms_round_trip() {
        for s in ["2022", "2015Q1", "2021-11", "2021-11-01"] {
            let ts: Timestamp = s.parse().unwrap();
            assert_eq!(ts.to_string(), s);
        }
    }

    #[test]
    fn natural_dates() {
        assert_eq!(
            Timestamp::parse_natural("Nov 1, 2021").unwrap().to_string(),
            "2021-11-01"
        );
        assert_eq!(
            Timestamp::parse_natural("May 1, 2022").unwrap().to_string(),
            "2022-05-01"
        );
        assert_eq!(
            Timestamp::parse_natural("September 30 2020").unwrap().to_string(),
            "2020-09-30"
        );
        assert_eq!(Timestamp::parse_natural("Jan 2022").unwrap().to_string(), "2022-01");
        assert!(Timestamp::parse_natural("Foo 1, 2021").is_none());
        let d = Timestamp::date(2021, 11, 1).unwrap();
        assert_eq!(Timestamp::parse_natural(&d.to_natural()), Some(d));
    }

    #[test]
    fn intervals() {
        let q1: Timestamp = "2015Q1".parse().unwrap();
        assert_eq!(q1.last_day(), NaiveDate::from_ymd_opt(2015, 3, 31).unwrap());
        let y: Timestamp = "2020".parse().unwrap();
        assert!(y.contains(&"2020-02-29".parse().unwrap()));
        assert!(!y.contains(&"2021-01-01".parse().unwrap()));
        assert!("2015Q5".parse::<Timestamp>().is_err());
        assert!("2021-02-30".parse::<Timestamp>().is_err());
    }
}
