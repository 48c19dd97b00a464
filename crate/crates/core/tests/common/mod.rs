//! Generators and oracles shared by the property tests and the acceptance
//! harness. Every oracle recomputes its expectation from the raw chart rows
//! without going through the code under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use vismanip_core::chart::{
    query_rows, stack_layout, Attribute, Axis, ChartSpec, ChartState, Encodings, Mark, RowId, Value,
};
use vismanip_core::exec::{apply_manip, ExecError};
use vismanip_core::manip::{GrowthMode, Manip, RearrangeMode};
use vismanip_core::task::{
    canonicalize, parse_task_text, serialize_task, validate, AggregateFn, AttributeRef, Channel, DeriveKind,
    DeriveSpec, Direction, Filter, FilterOp, FilterValue, Literal, Task, TaskKind,
};
use vismanip_core::time::Timestamp;

pub type Check = Result<(), TestCaseError>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(TestCaseError::fail(format!($($fmt)+)));
        }
    };
}

// ---------------------------------------------------------------------------
// Random tasks
// ---------------------------------------------------------------------------

fn word() -> BoxedStrategy<String> {
    prop_oneof![
        4 => prop::sample::select(vec![
            "coal", "GDP", "daily new cases", "country", "time", "2015Q1", "made in china", "in", "max",
            "top", "a,b", "say \"hi\"", "back\\slash", "x|y", "k:v", "@home", "{set}", "[r]", "(p)", "<=>",
            "Café", "São Paulo", "  padded ", "tab\there",
        ])
        .prop_map(str::to_string),
        1 => "[a-zA-Z0-9 ,;:()\\[\\]{}|@=<>\"\\\\é-]{1,12}",
    ]
    .prop_filter("nonempty after trim", |s| !s.trim().is_empty())
    .boxed()
}

fn channel() -> impl Strategy<Value = Channel> {
    prop::sample::select(Channel::ALL.to_vec())
}

fn attr_ref() -> BoxedStrategy<AttributeRef> {
    prop_oneof![
        6 => word().prop_map(AttributeRef::name),
        1 => (channel(), word()).prop_map(|(c, v)| AttributeRef::channel(c, v)),
        1 => (word(), channel(), word()).prop_map(|(n, c, v)| AttributeRef::mixed(n, c, v)),
    ]
    .boxed()
}

fn name_ref() -> impl Strategy<Value = AttributeRef> {
    word().prop_map(AttributeRef::name)
}

fn timestamp() -> BoxedStrategy<Timestamp> {
    prop_oneof![
        (1990i32..2030).prop_map(Timestamp::year),
        (1990i32..2030, 1u32..=4).prop_map(|(y, q)| Timestamp::quarter(y, q).unwrap()),
        (1990i32..2030, 1u32..=12).prop_map(|(y, m)| Timestamp::month(y, m).unwrap()),
        (1990i32..2030, 1u32..=12, 1u32..=28).prop_map(|(y, m, d)| Timestamp::date(y, m, d).unwrap()),
    ]
    .boxed()
}

fn literal() -> BoxedStrategy<Literal> {
    prop_oneof![
        (-1e6f64..1e6).prop_map(Literal::number),
        (0u32..5000).prop_map(|n| Literal::number(n as f64)),
        timestamp().prop_map(Literal::time),
        word().prop_map(Literal::text),
    ]
    .boxed()
}

fn range() -> BoxedStrategy<FilterValue> {
    prop_oneof![
        (-1e6f64..1e6, -1e6f64..1e6).prop_map(|(a, b)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            FilterValue::Range(Literal::number(lo), Literal::number(hi))
        }),
        (1990i32..2030, 0i32..10).prop_map(|(y, d)| {
            FilterValue::Range(Literal::time(Timestamp::year(y)), Literal::time(Timestamp::year(y + d)))
        }),
        (1990i32..2030, 1u32..=12, 0i64..400).prop_map(|(y, m, d)| {
            let lo = Timestamp::date(y, m, 1).unwrap();
            let hi = Timestamp::from_naive(lo.first_day() + chrono::Duration::days(d));
            FilterValue::Range(Literal::time(lo), Literal::time(hi))
        }),
    ]
    .boxed()
}

fn aggregate_fn() -> impl Strategy<Value = AggregateFn> {
    prop::sample::select(vec![
        AggregateFn::Max,
        AggregateFn::Min,
        AggregateFn::Avg,
        AggregateFn::Sum,
    ])
}

fn direction() -> impl Strategy<Value = Direction> {
    prop::sample::select(vec![
        Direction::Top,
        Direction::Bottom,
        Direction::Left,
        Direction::Right,
    ])
}

fn filter() -> BoxedStrategy<Filter> {
    let cmp_op = prop::sample::select(vec![FilterOp::Eq, FilterOp::Gt, FilterOp::Lt]);
    prop_oneof![
        4 => (name_ref(), cmp_op.clone(), literal()).prop_map(|(a, op, l)| Filter {
            attr: a,
            op,
            value: FilterValue::Literal(l),
            direction: None,
        }),
        1 => (prop_oneof![(channel(), word()).prop_map(|(c, v)| AttributeRef::channel(c, v)),
                          (word(), channel(), word()).prop_map(|(n, c, v)| AttributeRef::mixed(n, c, v))],
              literal())
            .prop_map(|(a, l)| Filter { attr: a, op: FilterOp::Eq, value: FilterValue::Literal(l), direction: None }),
        2 => (name_ref(), range()).prop_map(|(a, v)| Filter { attr: a, op: FilterOp::In, value: v, direction: None }),
        2 => (name_ref(), prop::collection::vec(literal(), 1..4)).prop_map(|(a, items)| Filter {
            attr: a,
            op: FilterOp::Eq,
            value: FilterValue::List(items),
            direction: None,
        }),
        1 => (name_ref(), cmp_op.clone(), aggregate_fn(), attr_ref())
            .prop_map(|(a, op, f, of)| Filter::aggregate(a, op, f, of)),
        1 => (name_ref(), cmp_op, 1u32..20, direction()).prop_map(|(a, op, k, d)| Filter::rank(a, op, k, d)),
    ]
    .boxed()
}

fn derive_spec() -> BoxedStrategy<DeriveSpec> {
    prop_oneof![
        (attr_ref(), prop::option::of(direction())).prop_map(|(a, d)| {
            let s = DeriveSpec::new(DeriveKind::Rank, vec![a]);
            match d {
                Some(d) => s.with_direction(d),
                None => s,
            }
        }),
        (attr_ref(), attr_ref()).prop_map(|(a, b)| DeriveSpec::new(DeriveKind::Difference, vec![a, b])),
        prop::collection::vec(attr_ref(), 2..4).prop_map(|ops| DeriveSpec::new(DeriveKind::Sum, ops)),
        attr_ref().prop_map(|a| DeriveSpec::new(DeriveKind::Trend, vec![a])),
        attr_ref().prop_map(|a| DeriveSpec::new(DeriveKind::Growth, vec![a])),
    ]
    .boxed()
}

fn identify() -> BoxedStrategy<Task> {
    (
        prop::option::of(attr_ref()),
        prop::collection::vec(filter(), 0..4),
        prop::option::of(derive_spec()),
    )
        .prop_map(|(target, filters, derive)| {
            let mut t = Task::new(TaskKind::Identify);
            if let Some(a) = target {
                t = t.with_target(a);
            }
            t.filters = filters;
            t.derive = derive;
            t
        })
        .boxed()
}

/// Random tasks that satisfy every structural invariant.
pub fn valid_task() -> impl Strategy<Value = Task> {
    let simple_kind = prop::sample::select(vec![TaskKind::Identify, TaskKind::Trend, TaskKind::Sum]);
    prop_oneof![
        3 => (simple_kind, identify()).prop_map(|(k, mut t)| {
            t.kind = k;
            t
        }),
        1 => (aggregate_fn(), attr_ref(), prop::collection::vec(filter(), 0..4)).prop_map(|(f, a, filters)| {
            let mut t = Task::new(TaskKind::Aggregate).with_aggregate_target(f, a);
            t.filters = filters;
            t
        }),
        1 => (prop::option::of(attr_ref()), prop::collection::vec(identify(), 2..4), prop::option::of(derive_spec()))
            .prop_map(|(target, subs, derive)| {
                let mut t = Task::new(TaskKind::Compare);
                if let Some(a) = target {
                    t = t.with_target(a);
                }
                t.subtasks = subs;
                t.derive = derive;
                t
            }),
    ]
}

pub fn check_round_trip(task: &Task) -> Check {
    ensure!(
        validate(task).is_empty(),
        "generator produced an invalid task: {:?}",
        validate(task)
    );
    let text = serialize_task(task);
    let parsed = parse_task_text(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
    let canon = canonicalize(task);
    ensure!(parsed == canon, "parse(serialize(t)) != canonicalize(t) for {text}");
    ensure!(
        canonicalize(&canon) == canon,
        "canonicalize is not idempotent on {text}"
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Random charts
// ---------------------------------------------------------------------------

/// Rows of a multi-series chart over consecutive days: `cells[s][t]` is the
/// value of series `s` at day `t`, or `None` when the point is missing.
#[derive(Debug, Clone)]
pub struct SeriesGrid {
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn day(t: usize) -> Timestamp {
    let start = chrono::NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    Timestamp::from_naive(start + chrono::Duration::days(t as i64))
}

pub fn series_name(s: usize) -> String {
    format!("s{s}")
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        3 => -1e3f64..1e6,
        1 => -1e6f64..1e3,
        1 => (0i32..50).prop_map(f64::from),
    ]
}

pub fn grid(
    series: std::ops::RangeInclusive<usize>,
    days: std::ops::RangeInclusive<usize>,
    holes: bool,
) -> impl Strategy<Value = SeriesGrid> {
    (series, days).prop_flat_map(move |(k, n)| {
        let cell = if holes {
            prop::option::weighted(0.8, value()).boxed()
        } else {
            value().prop_map(Some).boxed()
        };
        prop::collection::vec(prop::collection::vec(cell, n), k).prop_map(|cells| SeriesGrid { cells })
    })
}

impl SeriesGrid {
    pub fn spec(&self, mark: Mark) -> ChartSpec {
        let mut rows = Vec::new();
        for (s, col) in self.cells.iter().enumerate() {
            for (t, v) in col.iter().enumerate() {
                if let Some(v) = v {
                    rows.push(vec![
                        Value::Text(series_name(s)),
                        Value::Time(day(t)),
                        Value::Number(*v),
                    ]);
                }
            }
        }
        ChartSpec {
            attributes: vec![
                Attribute::categorical("s", (0..self.cells.len()).map(series_name).collect()),
                Attribute::temporal("t", None),
                Attribute::quantitative("v", None),
            ],
            rows,
            mark,
            encodings: Encodings {
                x: "t".into(),
                y: "v".into(),
                color: Some("s".into()),
            },
            channel_bindings: vec![],
        }
    }

    pub fn state(&self, mark: Mark) -> ChartState {
        ChartState::initial(Arc::new(self.spec(mark)))
    }
}

/// One value per category on a bar chart.
pub fn bars() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![2 => -1e4f64..1e4, 1 => (0i32..5).prop_map(f64::from)],
        1..12,
    )
}

pub fn bar_state(values: &[f64]) -> ChartState {
    let names: Vec<String> = (0..values.len()).map(|i| format!("c{i:02}")).collect();
    let spec = ChartSpec {
        attributes: vec![
            Attribute::categorical("c", names.clone()),
            Attribute::quantitative("v", None),
        ],
        rows: names
            .iter()
            .zip(values)
            .map(|(n, v)| vec![Value::Text(n.clone()), Value::Number(*v)])
            .collect(),
        mark: Mark::Bar,
        encodings: Encodings {
            x: "c".into(),
            y: "v".into(),
            color: None,
        },
        channel_bindings: vec![],
    };
    ChartState::initial(Arc::new(spec))
}

fn row_parts(spec: &ChartSpec, r: RowId) -> (&str, Timestamp, f64) {
    let row = &spec.rows[r];
    match (&row[0], &row[1], &row[2]) {
        (Value::Text(s), Value::Time(t), Value::Number(v)) => (s.as_str(), *t, *v),
        _ => unreachable!("grid rows are (text, time, number)"),
    }
}

// ---------------------------------------------------------------------------
// Executor oracles
// ---------------------------------------------------------------------------

/// A conjunction of plain filters over a grid chart.
#[derive(Debug, Clone)]
pub struct FilterCase {
    pub grid: SeriesGrid,
    pub series: Option<Vec<usize>>,
    pub days: Option<(usize, usize)>,
    pub threshold: Option<(bool, f64)>,
}

pub fn filter_case() -> impl Strategy<Value = FilterCase> {
    grid(1..=5, 1..=25, true).prop_flat_map(|g| {
        let k = g.cells.len();
        let n = g.cells[0].len();
        (
            Just(g),
            prop::option::of(prop::sample::subsequence((0..k).collect::<Vec<_>>(), 1..=k)),
            prop::option::of((0..n + 2, 0..n + 2).prop_map(|(a, b)| (a.min(b), a.max(b)))),
            prop::option::of((any::<bool>(), -1e3f64..1e6)),
        )
            .prop_map(|(grid, series, days, threshold)| FilterCase {
                grid,
                series,
                days,
                threshold,
            })
    })
}

impl FilterCase {
    pub fn filters(&self) -> Vec<Filter> {
        let mut out = Vec::new();
        if let Some(s) = &self.series {
            out.push(Filter::list(AttributeRef::name("s"), s.iter().map(|&i| series_name(i))));
        }
        if let Some((lo, hi)) = self.days {
            out.push(Filter::range(
                AttributeRef::name("t"),
                day(lo).to_string(),
                day(hi).to_string(),
            ));
        }
        if let Some((above, x)) = self.threshold {
            out.push(Filter {
                attr: AttributeRef::name("v"),
                op: if above { FilterOp::Gt } else { FilterOp::Lt },
                value: FilterValue::Literal(Literal::number(x)),
                direction: None,
            });
        }
        out
    }

    fn brute_force(&self, spec: &ChartSpec) -> BTreeSet<RowId> {
        let names: Option<BTreeSet<String>> = self
            .series
            .as_ref()
            .map(|s| s.iter().map(|&i| series_name(i)).collect());
        (0..spec.rows.len())
            .filter(|&r| {
                let (s, t, v) = row_parts(spec, r);
                names.as_ref().is_none_or(|n| n.contains(s))
                    && self.days.is_none_or(|(lo, hi)| {
                        (day(lo).start_ordinal()..=day(hi).start_ordinal()).contains(&t.start_ordinal())
                    })
                    && self
                        .threshold
                        .is_none_or(|(above, x)| if above { v > x } else { v < x })
            })
            .collect()
    }
}

/// Reducing to the selected rows, one filter at a time or all at once,
/// leaves exactly the rows a direct scan of the data selects.
pub fn check_reduce(case: &FilterCase) -> Check {
    let state = case.grid.state(Mark::Line);
    let expected = case.brute_force(&state.spec);
    let filters = case.filters();
    let selected = query_rows(&filters, &state).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure!(
        selected == expected,
        "query selected {selected:?}, scan selected {expected:?}"
    );

    let mut current = state.clone();
    for f in &filters {
        let keep = query_rows(std::slice::from_ref(f), &current).map_err(|e| TestCaseError::fail(e.to_string()))?;
        match apply_manip(
            &Manip::Reduce {
                keep_rows: keep.clone(),
            },
            &current,
        ) {
            Ok(next) => current = next,
            Err(ExecError::Precondition { .. }) if keep.is_empty() => {
                ensure!(expected.is_empty(), "an empty step selection but a nonempty scan");
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
    ensure!(
        current.view.visible_rows == expected,
        "stepwise reduce kept {:?}, scan selected {expected:?}",
        current.view.visible_rows
    );
    if !expected.is_empty() {
        let once = apply_manip(
            &Manip::Reduce {
                keep_rows: expected.clone(),
            },
            &state,
        )
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
        ensure!(once.view.visible_rows == expected, "single reduce kept other rows");
        ensure!(
            once.view.highlights.keys().all(|r| expected.contains(r)),
            "highlight outside kept rows"
        );
    }
    Ok(())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

/// Stacking conserves every value and every per-day total, and the y
/// domain covers the stacked extent.
pub fn check_stack(grid: &SeriesGrid) -> Check {
    let state = grid.state(Mark::Area);
    let stacked = apply_manip(
        &Manip::Rearrange {
            mode: RearrangeMode::Stack,
            key: None,
            ascending: None,
        },
        &state,
    )
    .map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure!(stacked.view.stacked, "state not marked stacked");
    let layout = stack_layout(&stacked, &stacked.view.visible_rows);
    ensure!(layout.len() == stacked.spec.rows.len(), "layout misses rows");

    let mut totals: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    let mut tops: BTreeMap<i64, Vec<(usize, f64)>> = BTreeMap::new();
    for (&r, &[base, top]) in &layout {
        let (s, t, v) = row_parts(&stacked.spec, r);
        ensure!(
            close(top - base, v, v.abs().max(base.abs())),
            "row {r}: interval {base}..{top} for value {v}"
        );
        let e = totals.entry(t.start_ordinal()).or_default();
        e.0 += v;
        e.1 += v.abs();
        let idx: usize = s[1..].parse().unwrap();
        tops.entry(t.start_ordinal()).or_default().push((idx, top));
    }
    for (t, (total, scale)) in &totals {
        let last = tops[t].iter().max_by_key(|(i, _)| *i).map(|(_, top)| *top).unwrap();
        ensure!(
            close(last, *total, *scale),
            "day {t}: stacked total {last} but values sum to {total}"
        );
    }
    let [lo, hi] = stacked.view.axis_domains[&Axis::Y];
    for (&r, &[base, top]) in &layout {
        let scale = base.abs().max(top.abs());
        ensure!(
            lo <= base.min(top) + 1e-9 * scale && base.max(top) <= hi + 1e-9 * scale,
            "row {r}: {base}..{top} outside y domain {lo}..{hi}"
        );
    }
    Ok(())
}

/// Sorting a bar chart orders the visible categories by value, ties by
/// name, and keeps exactly the visible categories.
pub fn check_sort(values: &[f64], keep: &[bool], ascending: bool) -> Check {
    let mut state = bar_state(values);
    let kept: BTreeSet<RowId> = (0..values.len())
        .filter(|&i| keep.get(i).copied().unwrap_or(true))
        .collect();
    if !kept.is_empty() && kept.len() < values.len() {
        state = apply_manip(
            &Manip::Reduce {
                keep_rows: kept.clone(),
            },
            &state,
        )
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    }
    let sorted = apply_manip(
        &Manip::Rearrange {
            mode: RearrangeMode::Sort,
            key: Some("v".into()),
            ascending: Some(ascending),
        },
        &state,
    )
    .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let order = sorted.category_order();

    let mut expected: Vec<(f64, String)> = state
        .view
        .visible_rows
        .iter()
        .map(|&r| (values[r], format!("c{r:02}")))
        .collect();
    expected.sort_by(|a, b| {
        let ord = a.0.partial_cmp(&b.0).unwrap();
        let ord = if ascending { ord } else { ord.reverse() };
        ord.then_with(|| a.1.cmp(&b.1))
    });
    let expected: Vec<String> = expected.into_iter().map(|(_, n)| n).collect();
    ensure!(order == expected, "sorted {order:?}, expected {expected:?}");
    ensure!(
        sorted.view.visible_rows == state.view.visible_rows,
        "sorting changed the visible rows"
    );
    Ok(())
}

/// Each rank equals one plus the number of distinct visible values that
/// beat it.
pub fn check_rank(values: &[f64], keep: &[bool], top: bool) -> Check {
    let mut state = bar_state(values);
    let kept: BTreeSet<RowId> = (0..values.len())
        .filter(|&i| keep.get(i).copied().unwrap_or(true))
        .collect();
    if !kept.is_empty() && kept.len() < values.len() {
        state = apply_manip(
            &Manip::Reduce {
                keep_rows: kept.clone(),
            },
            &state,
        )
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    }
    let direction = if top { Direction::Top } else { Direction::Bottom };
    let spec = DeriveSpec::new(DeriveKind::Rank, vec![AttributeRef::name("v")]).with_direction(direction);
    let next = apply_manip(
        &Manip::Derive {
            spec,
            name: "rank".into(),
            growth: GrowthMode::default(),
        },
        &state,
    )
    .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let visible: Vec<f64> = state.view.visible_rows.iter().map(|&r| values[r]).collect();
    let series = &next.view.derived_series[0];
    ensure!(
        series.rows.len() == visible.len(),
        "{} ranks for {} bars",
        series.rows.len(),
        visible.len()
    );
    for row in &series.rows {
        let cat = row.category.as_deref().unwrap();
        let v = values[cat[1..].parse::<usize>().unwrap()];
        let beaten_by: BTreeSet<u64> = visible
            .iter()
            .filter(|&&u| if top { u > v } else { u < v })
            .map(|u| u.to_bits())
            .collect();
        let expected = 1 + beaten_by.len();
        ensure!(
            row.value == expected as f64,
            "{cat} ({v}) ranked {} expected {expected}",
            row.value
        );
    }
    Ok(())
}

/// Sum and difference of two series equal the pointwise sum and difference
/// on exactly the days both series have a value.
pub fn check_derive(grid: &SeriesGrid, a: usize, b: usize, sum: bool) -> Check {
    let state = grid.state(Mark::Line);
    let kind = if sum { DeriveKind::Sum } else { DeriveKind::Difference };
    let spec = DeriveSpec::new(
        kind,
        vec![AttributeRef::name(series_name(a)), AttributeRef::name(series_name(b))],
    );
    let shared: Vec<(usize, f64)> = (0..grid.cells[a].len())
        .filter_map(|t| match (grid.cells[a][t], grid.cells[b][t]) {
            (Some(x), Some(y)) => Some((t, if sum { x + y } else { x - y })),
            _ => None,
        })
        .collect();
    let present = |s: usize| grid.cells[s].iter().any(Option::is_some);
    let result = apply_manip(
        &Manip::Derive {
            spec,
            name: "d".into(),
            growth: GrowthMode::default(),
        },
        &state,
    );
    let next = match result {
        Err(ExecError::NonOverlappingDomains) => {
            ensure!(
                shared.is_empty(),
                "no overlap reported but {} shared days",
                shared.len()
            );
            return Ok(());
        }
        Err(ExecError::MissingOperand(_)) if !present(a) || !present(b) => return Ok(()),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
        Ok(s) => s,
    };
    let rows = &next.view.derived_series[0].rows;
    let got: Vec<(Timestamp, f64)> = rows.iter().map(|r| (r.time.unwrap(), r.value)).collect();
    let want: Vec<(Timestamp, f64)> = shared.iter().map(|&(t, v)| (day(t), v)).collect();
    ensure!(got == want, "derived {got:?}, expected {want:?}");
    Ok(())
}

pub fn derive_case() -> impl Strategy<Value = (SeriesGrid, usize, usize, bool)> {
    grid(2..=4, 1..=30, true).prop_flat_map(|g| {
        let k = g.cells.len();
        (Just(g), 0..k, 0..k, any::<bool>()).prop_filter("distinct operands", |(_, a, b, _)| a != b)
    })
}

pub fn bar_case() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, bool)> {
    bars().prop_flat_map(|v| {
        let n = v.len();
        (
            Just(v),
            prop::collection::vec(prop::bool::weighted(0.8), n),
            any::<bool>(),
        )
    })
}
