use std::collections::{BTreeMap, BTreeSet};

use super::resolve::{Resolved, Resolver};
use super::spec::{AttrType, Value};
use super::state::{ChartState, RowId, XKey};
use super::ChartError;
use crate::task::{Direction, Filter, FilterOp, FilterValue, Literal};
use crate::time::Timestamp;

/// A filter whose references have been resolved to attribute indices and
/// whose literals have been checked against the attribute type.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedFilter {
    pub attr: usize,
    pub op: FilterOp,
    pub value: ResolvedValue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedValue {
    Text(Vec<String>),
    Number(Vec<f64>),
    Time(Vec<Timestamp>),
    NumberRange(f64, f64),
    TimeRange(Timestamp, Timestamp),
    /// Compared against an aggregate of `of` over the scoped rows.
    Aggregate {
        func: crate::task::AggregateFn,
        of: usize,
    },
    /// Rank or position count with its direction.
    Rank {
        count: u32,
        direction: Direction,
    },
}

fn mismatch(msg: String) -> ChartError {
    ChartError::TypeMismatch(msg)
}

fn literals(value: &FilterValue) -> Vec<&Literal> {
    match value {
        FilterValue::Literal(l) => vec![l],
        FilterValue::List(items) => items.iter().collect(),
        _ => Vec::new(),
    }
}

impl ResolvedFilter {
    pub fn resolve(f: &Filter, resolver: &Resolver<'_>) -> Result<Self, ChartError> {
        let spec = resolver.spec();
        let (attr, choice) = match resolver.resolve(&f.attr)? {
            Resolved::Attribute(i) => (i, None),
            Resolved::Choice { attribute, choice } => (attribute, Some(choice)),
        };
        let a = &spec.attributes[attr];
        if let Some(choice) = choice {
            if f.op != FilterOp::Eq {
                return Err(mismatch(format!("category `{choice}` only supports `=`")));
            }
            return Ok(ResolvedFilter {
                attr,
                op: FilterOp::Eq,
                value: ResolvedValue::Text(vec![choice]),
            });
        }
        if let Some(direction) = f.direction {
            let count = match &f.value {
                FilterValue::Literal(l) => l.as_count(),
                _ => None,
            }
            .ok_or_else(|| mismatch("rank filters take a positive count".into()))?;
            if f.op == FilterOp::In {
                return Err(mismatch("rank filters do not take ranges".into()));
            }
            if matches!(direction, Direction::Top | Direction::Bottom) && a.kind != AttrType::Quantitative {
                return Err(mismatch(format!("cannot rank by non-quantitative `{}`", a.name)));
            }
            return Ok(ResolvedFilter {
                attr,
                op: f.op,
                value: ResolvedValue::Rank { count, direction },
            });
        }
        if let FilterValue::Aggregate(agg) = &f.value {
            let of = resolver.quantitative(&agg.attribute)?;
            if a.kind != AttrType::Quantitative || f.op == FilterOp::In {
                return Err(mismatch(format!("aggregate comparison on `{}`", a.name)));
            }
            return Ok(ResolvedFilter {
                attr,
                op: f.op,
                value: ResolvedValue::Aggregate {
                    func: agg.aggregate,
                    of,
                },
            });
        }
        let value = match (a.kind, f.op, &f.value) {
            (AttrType::Categorical, FilterOp::Eq, v) => {
                ResolvedValue::Text(literals(v).into_iter().map(|l| l.as_str().to_string()).collect())
            }
            (AttrType::Categorical, op, _) => {
                return Err(mismatch(format!("`{}` on categorical `{}`", op.as_str(), a.name)))
            }
            (AttrType::Quantitative, FilterOp::In, FilterValue::Range(lo, hi)) => {
                match (lo.as_number(), hi.as_number()) {
                    (Some(lo), Some(hi)) => ResolvedValue::NumberRange(lo, hi),
                    _ => return Err(mismatch(format!("non-numeric range on `{}`", a.name))),
                }
            }
            (AttrType::Temporal, FilterOp::In, FilterValue::Range(lo, hi)) => {
                match (lo.as_timestamp(), hi.as_timestamp()) {
                    (Some(lo), Some(hi)) => ResolvedValue::TimeRange(lo, hi),
                    _ => return Err(mismatch(format!("non-temporal range on `{}`", a.name))),
                }
            }
            (AttrType::Quantitative, _, v) => ResolvedValue::Number(
                literals(v)
                    .into_iter()
                    .map(|l| l.as_number().ok_or_else(|| mismatch(format!("`{l}` is not a number"))))
                    .collect::<Result<_, _>>()?,
            ),
            (AttrType::Temporal, _, v) => ResolvedValue::Time(
                literals(v)
                    .into_iter()
                    .map(|l| {
                        l.as_timestamp()
                            .or_else(|| Timestamp::parse_natural(l.as_str()))
                            .ok_or_else(|| mismatch(format!("`{l}` is not a timestamp")))
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };
        if matches!(value, ResolvedValue::Text(ref v) if v.is_empty())
            || matches!(value, ResolvedValue::Number(ref v) if v.is_empty())
            || matches!(value, ResolvedValue::Time(ref v) if v.is_empty())
        {
            return Err(mismatch(format!("range value on `{}` requires `in`", a.name)));
        }
        Ok(ResolvedFilter { attr, op: f.op, value })
    }

    fn is_scoped(&self) -> bool {
        matches!(self.value, ResolvedValue::Aggregate { .. } | ResolvedValue::Rank { .. })
    }
}

fn time_cmp(op: FilterOp, row: &Timestamp, lit: &Timestamp) -> bool {
    match op {
        FilterOp::Eq => lit.contains(row) || row.contains(lit),
        FilterOp::Gt => row.start_ordinal() > lit.end_ordinal(),
        FilterOp::Lt => row.end_ordinal() < lit.start_ordinal(),
        FilterOp::In => false,
    }
}

fn num_cmp(op: FilterOp, v: f64, lit: f64) -> bool {
    match op {
        FilterOp::Eq => v == lit,
        FilterOp::Gt => v > lit,
        FilterOp::Lt => v < lit,
        FilterOp::In => false,
    }
}

/// Whether a row satisfies a non-scoped filter. Rows without a value for
/// the attribute (derived rows) never match.
pub fn row_matches(state: &ChartState, row: RowId, f: &ResolvedFilter) -> bool {
    let Some(v) = state.value(row, f.attr) else {
        return false;
    };
    match (&f.value, v) {
        (ResolvedValue::Text(items), Value::Text(s)) => items.iter().any(|i| i.to_lowercase() == s.to_lowercase()),
        (ResolvedValue::Number(items), Value::Number(n)) => items.iter().any(|&l| num_cmp(f.op, n, l)),
        (ResolvedValue::Time(items), Value::Time(t)) => items.iter().any(|l| time_cmp(f.op, &t, l)),
        (ResolvedValue::NumberRange(lo, hi), Value::Number(n)) => *lo <= n && n <= *hi,
        (ResolvedValue::TimeRange(lo, hi), Value::Time(t)) => {
            t.start_ordinal() >= lo.start_ordinal() && t.end_ordinal() <= hi.end_ordinal()
        }
        _ => false,
    }
}

/// Dense rank of each row among `scope`: by value of `attr` (descending for
/// `top`) or by x position (ascending for `left`).
fn dense_ranks(state: &ChartState, scope: &BTreeSet<RowId>, attr: usize, direction: Direction) -> BTreeMap<RowId, u32> {
    let mut out = BTreeMap::new();
    match direction {
        Direction::Top | Direction::Bottom => {
            let mut values: Vec<f64> = scope.iter().filter_map(|&r| state.number(r, attr)).collect();
            values.sort_by(|a, b| a.total_cmp(b));
            values.dedup();
            if direction == Direction::Top {
                values.reverse();
            }
            for &r in scope {
                if let Some(v) = state.number(r, attr) {
                    let pos = values.iter().position(|x| *x == v).expect("value present");
                    out.insert(r, pos as u32 + 1);
                }
            }
        }
        Direction::Left | Direction::Right => {
            let mut keys: Vec<XKey> = scope.iter().map(|&r| state.x_key(r)).collect();
            if !state.x_is_temporal() {
                let order = state.category_order();
                let idx = |k: &XKey| match k {
                    XKey::Category(c) => order.iter().position(|o| o == c).unwrap_or(usize::MAX),
                    _ => usize::MAX,
                };
                keys.sort_by_key(idx);
                keys.dedup();
                if direction == Direction::Right {
                    keys.reverse();
                }
            } else {
                keys.sort();
                keys.dedup();
                if direction == Direction::Right {
                    keys.reverse();
                }
            }
            for &r in scope {
                let k = state.x_key(r);
                let pos = keys.iter().position(|x| *x == k).expect("key present");
                out.insert(r, pos as u32 + 1);
            }
        }
    }
    out
}

/// Rows of the current view satisfying the conjunction of `filters`.
pub fn query_rows(filters: &[Filter], state: &ChartState) -> Result<BTreeSet<RowId>, ChartError> {
    query_rows_with(filters, state, &Resolver::for_state(state))
}

/// Plain filters select from the visible rows first; aggregate thresholds
/// and rank positions are then computed over that selection.
pub fn query_rows_with(
    filters: &[Filter],
    state: &ChartState,
    resolver: &Resolver<'_>,
) -> Result<BTreeSet<RowId>, ChartError> {
    let resolved: Vec<ResolvedFilter> = filters
        .iter()
        .map(|f| ResolvedFilter::resolve(f, resolver))
        .collect::<Result<_, _>>()?;
    let (scoped, plain): (Vec<&ResolvedFilter>, Vec<&ResolvedFilter>) = resolved.iter().partition(|f| f.is_scoped());
    let scope: BTreeSet<RowId> = state
        .view
        .visible_rows
        .iter()
        .copied()
        .filter(|&r| plain.iter().all(|f| row_matches(state, r, f)))
        .collect();
    let mut out = scope.clone();
    for f in scoped {
        let keep: BTreeSet<RowId> = match &f.value {
            ResolvedValue::Aggregate { func, of } => {
                let values: Vec<f64> = scope.iter().filter_map(|&r| state.number(r, *of)).collect();
                match func.apply(&values) {
                    Some(threshold) => scope
                        .iter()
                        .copied()
                        .filter(|&r| state.number(r, f.attr).is_some_and(|v| num_cmp(f.op, v, threshold)))
                        .collect(),
                    None => BTreeSet::new(),
                }
            }
            ResolvedValue::Rank { count, direction } => dense_ranks(state, &scope, f.attr, *direction)
                .into_iter()
                .filter(|(_, rank)| match f.op {
                    FilterOp::Lt => rank <= count,
                    FilterOp::Eq => rank == count,
                    FilterOp::Gt => rank > count,
                    FilterOp::In => false,
                })
                .map(|(r, _)| r)
                .collect(),
            _ => unreachable!("partitioned"),
        };
        out.retain(|r| keep.contains(r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::chart::spec::{Attribute, ChartSpec, Encodings, Mark};
    use crate::task::{AggregateFn, AttributeRef};

    fn energy(n_years: i32) -> ChartState {
        let energies = ["coal", "gas", "solar"];
        let mut rows = Vec::new();
        for (i, e) in energies.iter().enumerate() {
            for y in 0..n_years {
                let v = ((i as i32 * 7 + y * 3) % 11) as f64;
                rows.push(vec![
                    Value::Text(e.to_string()),
                    Value::Time(Timestamp::year(2010 + y)),
                    Value::Number(v),
                ]);
            }
        }
        let spec = ChartSpec {
            attributes: vec![
                Attribute::categorical("energy", energies.iter().map(|s| s.to_string()).collect()),
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
            channel_bindings: vec![],
        };
        ChartState::initial(Arc::new(spec))
    }

    fn name(s: &str) -> AttributeRef {
        AttributeRef::name(s)
    }

    #[test]
    fn conjunction() {
        let st = energy(13);
        let rows = query_rows(
            &[Filter::eq(name("energy"), "coal"), Filter::eq(name("time"), "2022")],
            &st,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        let r = *rows.iter().next().unwrap();
        assert_eq!(st.category(r).unwrap(), "coal");
        assert_eq!(st.time(r).unwrap().to_string(), "2022");
    }

    #[test]
    fn max_aggregate() {
        let st = energy(13);
        let f = Filter::aggregate(name("consumption"), FilterOp::Eq, AggregateFn::Max, name("consumption"));
        let rows = query_rows(&[f], &st).unwrap();
        assert!(!rows.is_empty());
        for r in rows {
            assert_eq!(st.y_value(r), Some(10.0));
        }
    }

    #[test]
    fn categorical_range_is_a_type_error() {
        let st = energy(3);
        assert!(matches!(
            query_rows(&[Filter::range(name("energy"), "a", "b")], &st),
            Err(ChartError::TypeMismatch(_))
        ));
        assert!(matches!(
            query_rows(&[Filter::eq(name("consumption"), "lots")], &st),
            Err(ChartError::TypeMismatch(_))
        ));
    }

    #[test]
    fn rank_counts_are_inclusive_for_lt() {
        let st = energy(1);
        let top = query_rows(
            &[Filter::rank(name("consumption"), FilterOp::Lt, 2, Direction::Top)],
            &st,
        )
        .unwrap();
        let mut vals: Vec<f64> = top.iter().map(|&r| st.y_value(r).unwrap()).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![7.0, 3.0].into_iter().rev().collect::<Vec<_>>());
        let second = query_rows(
            &[Filter::rank(name("consumption"), FilterOp::Eq, 2, Direction::Top)],
            &st,
        )
        .unwrap();
        assert_eq!(
            second.iter().map(|&r| st.y_value(r).unwrap()).collect::<Vec<_>>(),
            vec![3.0]
        );
    }

    /// Independent scan: evaluates each filter on each row straight from the
    /// row cells, with no shared code beyond the literal parsers.
    fn brute_force(st: &ChartState, filters: &[Filter]) -> BTreeSet<RowId> {
        let spec = &st.spec;
        let col = |n: &str| spec.attributes.iter().position(|a| a.name == n).unwrap();
        let plain = |f: &Filter, row: &[Value]| -> bool {
            let cell = &row[col(f.attr.name_part().unwrap())];
            match (&f.value, cell) {
                (FilterValue::Literal(l), Value::Text(s)) => l.as_str().eq_ignore_ascii_case(s),
                (FilterValue::List(ls), Value::Text(s)) => ls.iter().any(|l| l.as_str().eq_ignore_ascii_case(s)),
                (FilterValue::Literal(l), Value::Number(n)) => {
                    let x: f64 = l.as_str().parse().unwrap();
                    match f.op {
                        FilterOp::Eq => *n == x,
                        FilterOp::Gt => *n > x,
                        FilterOp::Lt => *n < x,
                        FilterOp::In => unreachable!(),
                    }
                }
                (FilterValue::Range(lo, hi), Value::Number(n)) => {
                    lo.as_str().parse::<f64>().unwrap() <= *n && *n <= hi.as_str().parse::<f64>().unwrap()
                }
                (FilterValue::Literal(l), Value::Time(t)) => {
                    let y: i32 = l.as_str().parse().unwrap();
                    let ty: i32 = t.to_string().parse().unwrap();
                    match f.op {
                        FilterOp::Eq => ty == y,
                        FilterOp::Gt => ty > y,
                        FilterOp::Lt => ty < y,
                        FilterOp::In => unreachable!(),
                    }
                }
                (FilterValue::Range(lo, hi), Value::Time(t)) => {
                    let ty: i32 = t.to_string().parse().unwrap();
                    lo.as_str().parse::<i32>().unwrap() <= ty && ty <= hi.as_str().parse::<i32>().unwrap()
                }
                _ => unreachable!(),
            }
        };
        let base: Vec<RowId> = (0..spec.rows.len())
            .filter(|&r| {
                filters
                    .iter()
                    .filter(|f| !matches!(f.value, FilterValue::Aggregate(_)))
                    .all(|f| plain(f, &spec.rows[r]))
            })
            .collect();
        let y = col("consumption");
        base.iter()
            .copied()
            .filter(|&r| {
                filters.iter().all(|f| match &f.value {
                    FilterValue::Aggregate(a) => {
                        let vals: Vec<f64> = base.iter().map(|&b| spec.rows[b][y].as_number().unwrap()).collect();
                        let t = match a.aggregate {
                            AggregateFn::Max => vals.iter().cloned().fold(f64::MIN, f64::max),
                            AggregateFn::Min => vals.iter().cloned().fold(f64::MAX, f64::min),
                            AggregateFn::Sum => vals.iter().sum(),
                            AggregateFn::Avg => vals.iter().sum::<f64>() / vals.len() as f64,
                        };
                        let v = spec.rows[r][y].as_number().unwrap();
                        match f.op {
                            FilterOp::Eq => v == t,
                            FilterOp::Gt => v > t,
                            FilterOp::Lt => v < t,
                            FilterOp::In => unreachable!(),
                        }
                    }
                    _ => true,
                })
            })
            .collect()
    }

    fn arb_filter() -> impl Strategy<Value = Filter> {
        let energy = prop::sample::subsequence(vec!["coal", "gas", "solar", "COAL"], 1..3)
            .prop_map(|v| Filter::list(AttributeRef::name("energy"), v));
        let energy_eq = prop::sample::select(vec!["coal", "gas", "solar", "wind"])
            .prop_map(|v| Filter::eq(AttributeRef::name("energy"), v));
        let op = prop::sample::select(vec![FilterOp::Eq, FilterOp::Gt, FilterOp::Lt]);
        let time_cmp = (op.clone(), 2008i32..2025).prop_map(|(op, y)| {
            let mut f = Filter::eq(AttributeRef::name("time"), y.to_string());
            f.op = op;
            f
        });
        let time_range = (2008i32..2025, 0i32..8)
            .prop_map(|(y, w)| Filter::range(AttributeRef::name("time"), y.to_string(), (y + w).to_string()));
        let num_cmp = (op.clone(), 0u32..12).prop_map(|(op, v)| {
            let mut f = Filter::eq(AttributeRef::name("consumption"), v.to_string());
            f.op = op;
            f
        });
        let num_range = (0u32..12, 0u32..6)
            .prop_map(|(v, w)| Filter::range(AttributeRef::name("consumption"), v.to_string(), (v + w).to_string()));
        let agg = (
            op,
            prop::sample::select(vec![
                AggregateFn::Max,
                AggregateFn::Min,
                AggregateFn::Avg,
                AggregateFn::Sum,
            ]),
        )
            .prop_map(|(op, a)| {
                Filter::aggregate(
                    AttributeRef::name("consumption"),
                    op,
                    a,
                    AttributeRef::name("consumption"),
                )
            });
        prop_oneof![energy, energy_eq, time_cmp, time_range, num_cmp, num_range, agg]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn matches_brute_force(filters in prop::collection::vec(arb_filter(), 0..4)) {
            let st = energy(15);
            let got = query_rows(&filters, &st).unwrap();
            prop_assert_eq!(got, brute_force(&st, &filters).into_iter().collect::<BTreeSet<_>>());
        }
    }
}
