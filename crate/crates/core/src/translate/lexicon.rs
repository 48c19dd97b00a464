use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

use crate::task::AggregateFn;
use crate::time::{month_number, Timestamp};

pub(crate) const MAX_WORDS: &[&str] = &[
    "highest", "largest", "greatest", "most", "biggest", "fastest", "maximum",
];
pub(crate) const MIN_WORDS: &[&str] = &["lowest", "smallest", "least", "fewest", "slowest", "minimum"];

const COUNT_WORDS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];
const ORDINAL_WORDS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];

pub(crate) fn superlative_fn(word: &str) -> Option<AggregateFn> {
    if MAX_WORDS.contains(&word) {
        Some(AggregateFn::Max)
    } else if MIN_WORDS.contains(&word) {
        Some(AggregateFn::Min)
    } else {
        None
    }
}

pub(crate) fn count_value(word: &str) -> Option<u32> {
    if let Some(i) = COUNT_WORDS.iter().position(|w| *w == word) {
        return Some(i as u32 + 1);
    }
    word.parse().ok().filter(|&n| n >= 1)
}

pub(crate) fn ordinal_value(word: &str) -> Option<u32> {
    if let Some(i) = ORDINAL_WORDS.iter().position(|w| *w == word) {
        return Some(i as u32 + 1);
    }
    let digits = word.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    let suffix = &word[digits.len()..];
    if ["st", "nd", "rd", "th"].contains(&suffix) {
        digits.parse().ok().filter(|&n| n >= 1)
    } else {
        None
    }
}

pub(crate) fn ordinal_word(n: u32) -> String {
    ORDINAL_WORDS
        .get((n as usize).wrapping_sub(1))
        .map(|w| w.to_string())
        .unwrap_or_else(|| {
            let suffix = match (n % 10, n % 100) {
                (1, r) if r != 11 => "st",
                (2, r) if r != 12 => "nd",
                (3, r) if r != 13 => "rd",
                _ => "th",
            };
            format!("{n}{suffix}")
        })
}

/// English plural of the last word of `name`.
pub fn plural(name: &str) -> String {
    let lower = name.to_ascii_lowercase();
    if lower.ends_with('s') || lower.ends_with('x') || lower.ends_with("ch") || lower.ends_with("sh") {
        if lower.ends_with("ss") || !lower.ends_with('s') {
            return format!("{name}es");
        }
        return name.to_string();
    }
    if let Some(stem) = name.strip_suffix('y') {
        if !stem.ends_with(['a', 'e', 'i', 'o', 'u']) {
            return format!("{stem}ies");
        }
    }
    format!("{name}s")
}

pub(crate) fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

/// Colour words that name a mark when followed by a mark noun.
pub(crate) const COLOR_WORDS: [&str; 17] = [
    "red", "blue", "green", "orange", "purple", "brown", "pink", "gray", "grey", "yellow", "teal", "black", "cyan",
    "white", "magenta", "violet", "gold",
];

/// True when `text[range]` does not continue a word on either side.
pub(crate) fn at_word_boundary(text: &str, range: &Range<usize>) -> bool {
    let b = text.as_bytes();
    let left = range.start == 0 || !is_word_byte(b[range.start - 1]);
    let right = range.end >= b.len() || !is_word_byte(b[range.end]);
    left && right
}

/// Every word-bounded occurrence of `needle` (already lowercase) in `hay`.
pub(crate) fn find_word(hay: &str, needle: &str) -> Vec<Range<usize>> {
    if needle.is_empty() {
        return Vec::new();
    }
    hay.match_indices(needle)
        .map(|(i, m)| i..i + m.len())
        .filter(|r| at_word_boundary(hay, r))
        .collect()
}

const MONTH: &str = r"(?:january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sept|sep|oct|nov|dec)\.?";

fn time_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let alts = [
            format!(r"{MONTH}\s+\d{{1,2}}(?:st|nd|rd|th)?,?\s+\d{{4}}"),
            format!(r"\d{{1,2}}(?:st|nd|rd|th)?\s+{MONTH},?\s+\d{{4}}"),
            format!(r"{MONTH},?\s+\d{{4}}"),
            r"\d{4}-\d{2}-\d{2}".to_string(),
            r"\d{1,2}/\d{1,2}/\d{4}".to_string(),
            r"\d{4}-\d{2}".to_string(),
            r"\d{4}\s?q[1-4]".to_string(),
            r"q[1-4]\s+\d{4}".to_string(),
            r"[12]\d{3}".to_string(),
        ];
        Regex::new(&format!(r"(?i)\b(?:{})\b", alts.join("|"))).expect("time pattern")
    })
}

/// Timestamps mentioned in `text`, as byte ranges.
pub(crate) fn scan_times(text: &str, day_first: bool) -> Vec<(Range<usize>, Timestamp)> {
    time_regex()
        .find_iter(text)
        .filter_map(|m| parse_time_phrase(m.as_str(), day_first).map(|ts| (m.range(), ts)))
        .collect()
}

pub(crate) fn parse_time_phrase(phrase: &str, day_first: bool) -> Option<Timestamp> {
    let p = phrase.trim().to_ascii_lowercase();
    if let Some(ts) = Timestamp::parse_natural(&p) {
        return Some(ts);
    }
    let compact: String = p.split_whitespace().collect();
    if let Ok(ts) = compact.to_ascii_uppercase().parse() {
        return Some(ts);
    }
    if let Some(q) = p.strip_prefix('q') {
        let mut parts = q.split_whitespace();
        let (quarter, year) = (parts.next()?, parts.next()?);
        return format!("{year}Q{quarter}").parse().ok();
    }
    if p.contains('/') {
        let nums: Vec<u32> = p.split('/').map(|s| s.parse().ok()).collect::<Option<_>>()?;
        let (m, d) = if day_first {
            (nums[1], nums[0])
        } else {
            (nums[0], nums[1])
        };
        return Timestamp::date(nums[2] as i32, m, d);
    }
    // "1st November 2021"
    let cleaned = p.replace(',', " ");
    let words: Vec<&str> = cleaned.split_whitespace().collect();
    if words.len() == 3 && month_number(words[1]).is_some() {
        return Timestamp::parse_natural(&format!("{} {} {}", words[1], words[0], words[2]));
    }
    None
}

/// Number written with optional thousands separators.
pub(crate) fn parse_number(text: &str) -> Option<f64> {
    text.replace(',', "").parse::<f64>().ok().filter(|n| n.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plurals() {
        assert_eq!(plural("country"), "countries");
        assert_eq!(plural("population"), "populations");
        assert_eq!(plural("programming language"), "programming languages");
        assert_eq!(plural("day"), "days");
        assert_eq!(plural("class"), "classes");
        assert_eq!(plural("box"), "boxes");
        assert_eq!(plural("daily new cases"), "daily new cases");
    }

    #[test]
    fn times_in_prose() {
        let found = scan_times(
            "from Nov 1, 2021 to May 1, 2022 and in 2015Q1, March 2020, Q3 2019",
            false,
        );
        let got: Vec<String> = found.iter().map(|(_, t)| t.to_string()).collect();
        assert_eq!(got, ["2021-11-01", "2022-05-01", "2015Q1", "2020-03", "2019Q3"]);
    }

    #[test]
    fn numeric_dates_follow_locale() {
        assert_eq!(
            parse_time_phrase("03/04/2021", false).unwrap().to_string(),
            "2021-03-04"
        );
        assert_eq!(parse_time_phrase("03/04/2021", true).unwrap().to_string(), "2021-04-03");
        assert_eq!(
            parse_time_phrase("1st November 2021", false).unwrap().to_string(),
            "2021-11-01"
        );
    }

    #[test]
    fn counts_and_ordinals() {
        assert_eq!(count_value("three"), Some(3));
        assert_eq!(count_value("10"), Some(10));
        assert_eq!(ordinal_value("third"), Some(3));
        assert_eq!(ordinal_value("12th"), Some(12));
        assert_eq!(ordinal_word(22), "22nd");
    }
}
