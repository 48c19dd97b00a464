//! Bundled sample charts used by the CLI, the benches and the tests.

use chrono::{Datelike, Duration, NaiveDate};

use crate::chart::{Attribute, ChannelBinding, ChartSpec, Encodings, Mark, Value};
use crate::task::Channel;
use crate::time::Timestamp;

pub const COVID_COUNTRIES: [(&str, &str); 6] = [
    ("India", "orange"),
    ("Canada", "red"),
    ("Germany", "green"),
    ("United States", "blue"),
    ("Brazil", "purple"),
    ("France", "brown"),
];

/// Waves as (peak day offset, width in days, height).
const WAVES: [&[(f64, f64, f64)]; 6] = [
    &[
        (250.0, 40.0, 90_000.0),
        (470.0, 25.0, 380_000.0),
        (735.0, 20.0, 300_000.0),
    ],
    &[(100.0, 30.0, 1_800.0), (350.0, 45.0, 8_000.0), (730.0, 25.0, 42_000.0)],
    &[(80.0, 20.0, 6_000.0), (340.0, 50.0, 25_000.0), (790.0, 40.0, 210_000.0)],
    &[
        (180.0, 35.0, 65_000.0),
        (355.0, 40.0, 250_000.0),
        (725.0, 18.0, 800_000.0),
    ],
    &[
        (200.0, 60.0, 45_000.0),
        (510.0, 50.0, 75_000.0),
        (740.0, 20.0, 180_000.0),
    ],
    &[(70.0, 15.0, 5_000.0), (290.0, 25.0, 55_000.0), (740.0, 30.0, 330_000.0)],
];

pub const COVID_DAYS: i64 = 1100;

fn covid_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).expect("valid date")
}

fn to_ts(d: NaiveDate) -> Timestamp {
    Timestamp::date(d.year(), d.month(), d.day()).expect("valid date")
}

/// Daily new cases for six countries over 1,100 days (6,600 rows).
pub fn covid_spec() -> ChartSpec {
    let start = covid_start();
    let mut rows = Vec::with_capacity(COVID_COUNTRIES.len() * COVID_DAYS as usize);
    for (ci, (country, _)) in COVID_COUNTRIES.iter().enumerate() {
        for day in 0..COVID_DAYS {
            let t = day as f64;
            let mut v: f64 = WAVES[ci]
                .iter()
                .map(|(peak, width, height)| height * (-((t - peak) / width).powi(2) / 2.0).exp())
                .sum();
            // weekly reporting cycle plus a fixed pseudo-random jitter
            v *= 1.0 + 0.08 * ((t / 7.0) * std::f64::consts::TAU).sin();
            v += ((day * 7919 + ci as i64 * 104_729) % 97) as f64;
            rows.push(vec![
                Value::Text(country.to_string()),
                Value::Time(to_ts(start + Duration::days(day))),
                Value::Number(v.round()),
            ]);
        }
    }
    let end = start + Duration::days(COVID_DAYS - 1);
    ChartSpec {
        attributes: vec![
            Attribute::categorical("country", COVID_COUNTRIES.iter().map(|(c, _)| c.to_string()).collect()),
            Attribute::temporal("date", Some([to_ts(start), to_ts(end)])),
            Attribute::quantitative("daily new cases", None).with_synonyms(&["cases", "new cases"]),
        ],
        rows,
        mark: Mark::Line,
        encodings: Encodings {
            x: "date".into(),
            y: "daily new cases".into(),
            color: Some("country".into()),
        },
        channel_bindings: color_bindings(&COVID_COUNTRIES),
    }
}

fn color_bindings(pairs: &[(&str, &str)]) -> Vec<ChannelBinding> {
    pairs
        .iter()
        .map(|(choice, color)| ChannelBinding {
            channel: Channel::Color,
            value: color.to_string(),
            choice: choice.to_string(),
        })
        .collect()
}

/// Yearly consumption per energy source, 2000 to 2022.
pub fn energy_spec() -> ChartSpec {
    let sources = [
        ("coal", "black", 150.0, -1.5),
        ("oil", "brown", 180.0, 0.4),
        ("gas", "blue", 110.0, 2.1),
        ("nuclear", "purple", 28.0, -0.3),
        ("solar", "orange", 0.5, 1.9),
        ("wind", "green", 1.0, 2.6),
    ];
    let mut rows = Vec::new();
    for (name, _, base, slope) in sources {
        for (i, year) in (2000..=2022).enumerate() {
            let t = i as f64;
            let v = (base + slope * t + if slope > 1.5 { 0.12 * t * t } else { 0.0 }).max(0.1);
            rows.push(vec![
                Value::Text(name.into()),
                Value::Time(Timestamp::year(year)),
                Value::Number((v * 10.0).round() / 10.0),
            ]);
        }
    }
    let bindings: Vec<(&str, &str)> = sources.iter().map(|(n, c, _, _)| (*n, *c)).collect();
    ChartSpec {
        attributes: vec![
            Attribute::categorical("energy", sources.iter().map(|s| s.0.to_string()).collect()),
            Attribute::temporal("time", None),
            Attribute::quantitative("consumption", None),
        ],
        rows,
        mark: Mark::Line,
        encodings: Encodings {
            x: "time".into(),
            y: "consumption".into(),
            color: Some("energy".into()),
        },
        channel_bindings: color_bindings(&bindings),
    }
}

/// Price per fruit as a bar chart.
pub fn fruit_spec() -> ChartSpec {
    let fruits = [
        ("apples", "red", 3.2),
        ("oranges", "orange", 2.5),
        ("bananas", "yellow", 1.1),
        ("pears", "green", 2.9),
    ];
    let bindings: Vec<(&str, &str)> = fruits.iter().map(|(n, c, _)| (*n, *c)).collect();
    ChartSpec {
        attributes: vec![
            Attribute::categorical("fruit", fruits.iter().map(|f| f.0.to_string()).collect()),
            Attribute::quantitative("price", None),
        ],
        rows: fruits
            .iter()
            .map(|(n, _, p)| vec![Value::Text(n.to_string()), Value::Number(*p)])
            .collect(),
        mark: Mark::Bar,
        encodings: Encodings {
            x: "fruit".into(),
            y: "price".into(),
            color: None,
        },
        channel_bindings: color_bindings(&bindings),
    }
}

pub fn sample(name: &str) -> Option<ChartSpec> {
    match name {
        "covid" => Some(covid_spec()),
        "energy" => Some(energy_spec()),
        "fruit" => Some(fruit_spec()),
        _ => None,
    }
}

pub const SAMPLES: [&str; 3] = ["covid", "energy", "fruit"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_survive_json_round_trip() {
        for name in SAMPLES {
            let spec = sample(name).unwrap();
            let back = ChartSpec::from_json(spec.to_json()).unwrap();
            assert_eq!(back, ChartSpec::from_json(back.to_json()).unwrap(), "{name}");
        }
    }

    #[test]
    fn covid_is_large_enough() {
        let spec = covid_spec();
        assert!(spec.rows.len() >= 6000);
        assert_eq!(spec.channel_value_of(Channel::Color, "Germany"), Some("green"));
        assert!(spec.rows.iter().all(|r| r[2].as_number().unwrap() >= 0.0));
    }
}
