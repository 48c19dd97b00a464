//! Applies manipulation steps to chart states and renders keyframes.

use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::chart::{
    render_svg, stack_layout, Anchor, AttrType, Axis, ChartError, ChartState, DerivedRow, DerivedSeries, Intensity,
    Mark, Resolved, Resolver, RowId, SortKey,
};
use crate::manip::{GrowthMode, Manip, ManipKind, ManipStep, RearrangeMode};
use crate::task::text::attr_to_string;
use crate::task::{DeriveKind, DeriveSpec};
use crate::time::Timestamp;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("precondition violated for {step}: {condition}")]
    Precondition { step: ManipKind, condition: String },
    #[error("missing operand: {0}")]
    MissingOperand(String),
    #[error("operands share no x positions")]
    NonOverlappingDomains,
    #[error(transparent)]
    Chart(#[from] ChartError),
}

fn violated(step: ManipKind, condition: impl Into<String>) -> ExecError {
    ExecError::Precondition {
        step,
        condition: condition.into(),
    }
}

/// One rendered state of an answer. Keyframe 0 is the initial state and
/// carries no step.
#[derive(Debug, Clone)]
pub struct Keyframe {
    pub index: usize,
    pub step: Option<ManipStep>,
    pub state: ChartState,
    pub svg: String,
}

impl Serialize for Keyframe {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Keyframe", 3)?;
        s.serialize_field("index", &self.index)?;
        s.serialize_field("step", &self.step)?;
        s.serialize_field("svg", &self.svg)?;
        s.end()
    }
}

/// Name a derivation by its text form, e.g. `sum(India, Canada)`.
pub fn default_derive_name(spec: &DeriveSpec) -> String {
    let ops: Vec<String> = spec.operands.iter().map(attr_to_string).collect();
    format!("{}({})", spec.kind.as_str(), ops.join(", "))
}

pub fn apply(step: &ManipStep, state: &ChartState) -> Result<ChartState, ExecError> {
    apply_manip(&step.manip, state)
}

pub fn apply_manip(manip: &Manip, state: &ChartState) -> Result<ChartState, ExecError> {
    let kind = manip.kind();
    let mut next = state.clone();
    let view = &mut next.view;
    match manip {
        Manip::Highlight { rows, intensity, reset } => {
            if rows.is_empty() {
                return Err(violated(kind, "highlight rows must be nonempty"));
            }
            if !rows.is_subset(&view.visible_rows) {
                return Err(violated(kind, "highlight rows must be visible"));
            }
            if *reset {
                view.highlights.clear();
            }
            for &r in rows {
                view.highlights.insert(r, *intensity);
            }
        }
        Manip::Annotate { anchor, .. } => {
            if let Anchor::Row { row } = anchor {
                if !view.visible_rows.contains(row) {
                    return Err(violated(kind, "annotation anchor row must be visible"));
                }
            }
            let Manip::Annotate {
                anchor,
                text,
                guideline,
            } = manip.clone()
            else {
                unreachable!()
            };
            view.annotations.push(crate::chart::Annotation {
                anchor,
                text,
                guideline,
            });
        }
        Manip::Rescale { axis, domain } => {
            let [lo, hi] = *domain;
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(violated(kind, "domain must be finite and ordered"));
            }
            if let Some([dlo, dhi]) = data_extent(state, &state.view.visible_rows, *axis) {
                let tol = EPS * dlo.abs().max(dhi.abs()).max(1.0);
                if dlo < lo - tol || dhi > hi + tol {
                    return Err(violated(kind, "domain must cover the visible data"));
                }
            }
            view.axis_domains.insert(*axis, *domain);
            if *axis == Axis::X {
                let fitted = next.fitted_domains(&next.view.visible_rows);
                if let Some(y) = fitted.get(&Axis::Y) {
                    next.view.axis_domains.insert(Axis::Y, *y);
                }
            }
        }
        Manip::Rearrange { mode, key, ascending } => match mode {
            RearrangeMode::Stack => {
                if view.mark == Mark::Line {
                    return Err(violated(kind, "stacking requires an area or bar mark"));
                }
                view.stacked = true;
                view.aligned = false;
                next.widen_domains_to_fit();
            }
            RearrangeMode::Align => {
                if view.mark == Mark::Line {
                    return Err(violated(kind, "alignment requires an area or bar mark"));
                }
                view.stacked = false;
                view.aligned = true;
                next.widen_domains_to_fit();
            }
            RearrangeMode::Sort => {
                let Some(key) = key else {
                    return Err(violated(kind, "sort requires a key"));
                };
                if view.mark != Mark::Bar {
                    return Err(violated(kind, "sorting requires a bar mark"));
                }
                let known = state.spec.attr(key).is_some_and(|a| a.kind == AttrType::Quantitative)
                    || state
                        .view
                        .derived_series
                        .iter()
                        .any(|s| &s.name == key || &s.measure == key);
                if !known {
                    return Err(violated(kind, format!("unknown sort key `{key}`")));
                }
                view.sort_key = Some(SortKey {
                    attribute: key.clone(),
                    ascending: ascending.unwrap_or(true),
                });
            }
        },
        Manip::Reduce { keep_rows } => {
            if keep_rows.is_empty() {
                return Err(violated(kind, "reduce must keep at least one row"));
            }
            if !keep_rows.is_subset(&view.visible_rows) {
                return Err(violated(kind, "kept rows must be visible"));
            }
            view.visible_rows = keep_rows.clone();
            view.highlights.retain(|r, _| keep_rows.contains(r));
            view.annotations
                .retain(|a| !matches!(a.anchor, Anchor::Row { row } if !keep_rows.contains(&row)));
        }
        Manip::Derive { spec, name, growth } => {
            if view.derived_series.iter().any(|s| &s.name == name) {
                return Err(violated(kind, format!("derived series `{name}` already exists")));
            }
            let (measure, rows) = compute_derive(spec, name, state, *growth)?;
            let start = state.total_rows();
            let n = rows.len();
            view.derived_series.push(DerivedSeries {
                name: name.clone(),
                measure,
                rows,
                provenance: spec.clone(),
            });
            view.visible_rows.extend(start..start + n);
            next.widen_domains_to_fit();
        }
        Manip::Reencode { target_mark } => {
            if *target_mark == view.mark {
                return Err(violated(kind, "target mark equals the current mark"));
            }
            view.mark = *target_mark;
            if *target_mark == Mark::Line {
                view.stacked = false;
                view.aligned = false;
            }
            next.widen_domains_to_fit();
        }
    }
    Ok(next)
}

/// Extent of the visible data along one axis: x positions, or y values
/// (stacked tops included when stacked).
pub fn data_extent(state: &ChartState, rows: &BTreeSet<RowId>, axis: Axis) -> Option<[f64; 2]> {
    let values: Vec<f64> = match axis {
        Axis::X => rows.iter().filter_map(|&r| state.x_position(r)).collect(),
        Axis::Y if state.view.stacked => {
            let layout = stack_layout(state, rows);
            layout.values().flat_map(|[a, b]| [*a, *b]).collect()
        }
        Axis::Y => rows.iter().filter_map(|&r| state.y_value(r)).collect(),
    };
    if values.is_empty() {
        return None;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some([lo, hi])
}

/// Apply every step in order, discarding all frames if any step fails.
pub fn replay(steps: &[ManipStep], initial: &ChartState) -> Result<Vec<ChartState>, ExecError> {
    let mut states = Vec::with_capacity(steps.len() + 1);
    states.push(initial.clone());
    for step in steps {
        let next = apply(step, states.last().expect("nonempty"))?;
        states.push(next);
    }
    Ok(states)
}

pub fn apply_all(steps: &[ManipStep], initial: &ChartState) -> Result<Vec<Keyframe>, ExecError> {
    let states = replay(steps, initial)?;
    let svgs = render_all(&states);
    Ok(states
        .into_iter()
        .zip(svgs)
        .enumerate()
        .map(|(index, (state, svg))| Keyframe {
            index,
            step: index.checked_sub(1).map(|i| steps[i].clone()),
            state,
            svg,
        })
        .collect())
}

/// Rendering is a pure function of each state, so completed states are
/// rendered on scoped worker threads.
fn render_all(states: &[ChartState]) -> Vec<String> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(states.len())
        .max(1);
    if workers == 1 {
        return states.iter().map(render_svg).collect();
    }
    let chunk = states.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = states
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(render_svg).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("render worker panicked"))
            .collect()
    })
}

/// Base rows that attribute-valued derivations range over: the focused
/// visible rows when anything is focused, otherwise all visible base rows.
fn attribute_scope(state: &ChartState) -> Vec<RowId> {
    let base: Vec<RowId> = state
        .view
        .visible_rows
        .iter()
        .copied()
        .filter(|&r| !state.is_derived(r))
        .collect();
    let focused: Vec<RowId> = base
        .iter()
        .copied()
        .filter(|r| state.view.highlights.get(r) == Some(&Intensity::Focus))
        .collect();
    if focused.is_empty() {
        base
    } else {
        focused
    }
}

fn time_key(t: Option<Timestamp>) -> Option<(i64, i64)> {
    t.map(|t| (t.start_ordinal(), t.end_ordinal()))
}

/// Summed value per time span, keeping the first timestamp seen.
type PointSums = BTreeMap<Option<(i64, i64)>, (Option<Timestamp>, f64)>;

/// Rows of a derivation and the measure their values are expressed in.
pub fn compute_derive(
    spec: &DeriveSpec,
    name: &str,
    state: &ChartState,
    growth: GrowthMode,
) -> Result<(String, Vec<DerivedRow>), ExecError> {
    let resolver = Resolver::for_state(state);
    let resolved: Vec<Resolved> = spec
        .operands
        .iter()
        .map(|o| resolver.resolve(o))
        .collect::<Result<_, _>>()?;
    let y_name = state.spec.encodings.y.clone();
    let all_choices = resolved.iter().all(|r| matches!(r, Resolved::Choice { .. }));
    let all_attrs = resolved.iter().all(|r| matches!(r, Resolved::Attribute(_)));
    if !all_choices && !all_attrs {
        return Err(ExecError::MissingOperand(
            "operands must all be series or all be attributes".into(),
        ));
    }
    let quantitative = |r: &Resolved| -> Result<usize, ExecError> {
        match r {
            Resolved::Attribute(i) if state.spec.attributes[*i].kind == AttrType::Quantitative => Ok(*i),
            Resolved::Attribute(i) => Err(ExecError::MissingOperand(format!(
                "`{}` is not quantitative",
                state.spec.attributes[*i].name
            ))),
            Resolved::Choice { choice, .. } => {
                Err(ExecError::MissingOperand(format!("`{choice}` is not an attribute")))
            }
        }
    };
    let series_rows = |choice: &str| -> Result<Vec<RowId>, ExecError> {
        let rows: Vec<RowId> = state
            .view
            .visible_rows
            .iter()
            .copied()
            .filter(|&r| state.is_plotted(r) && state.category(r).as_deref() == Some(choice))
            .collect();
        if rows.is_empty() {
            return Err(ExecError::MissingOperand(format!("no visible data for `{choice}`")));
        }
        Ok(rows)
    };
    let choice_of = |r: &Resolved| match r {
        Resolved::Choice { choice, .. } => choice.clone(),
        Resolved::Attribute(_) => unreachable!("checked all_choices"),
    };
    let category_for = |rows: &[RowId]| {
        let cats: BTreeSet<Option<String>> = rows.iter().map(|&r| state.category(r)).collect();
        let single = cats.len() <= 1;
        move |cat: Option<String>| -> Option<String> {
            match cat {
                Some(c) if !single => Some(format!("{name} [{c}]")),
                _ => Some(name.to_string()),
            }
        }
    };

    match spec.kind {
        DeriveKind::Sum | DeriveKind::Difference => {
            let combine = |vals: &[f64]| -> f64 {
                if spec.kind == DeriveKind::Sum {
                    vals.iter().sum()
                } else {
                    vals[0] - vals[1]
                }
            };
            if all_choices {
                let mut per_operand: Vec<PointSums> = Vec::new();
                for r in &resolved {
                    let mut m = BTreeMap::new();
                    for row in series_rows(&choice_of(r))? {
                        let t = state.time(row);
                        let e = m.entry(time_key(t)).or_insert((t, 0.0));
                        e.1 += state.y_value(row).unwrap_or(0.0);
                    }
                    per_operand.push(m);
                }
                let mut out = Vec::new();
                for (key, (t, _)) in &per_operand[0] {
                    let vals: Option<Vec<f64>> = per_operand.iter().map(|m| m.get(key).map(|(_, v)| *v)).collect();
                    if let Some(vals) = vals {
                        out.push(DerivedRow {
                            category: Some(name.to_string()),
                            time: *t,
                            value: combine(&vals),
                        });
                    }
                }
                if out.is_empty() {
                    return Err(ExecError::NonOverlappingDomains);
                }
                Ok((y_name, out))
            } else {
                let attrs: Vec<usize> = resolved.iter().map(quantitative).collect::<Result<_, _>>()?;
                let scope = attribute_scope(state);
                let cat = category_for(&scope);
                let out: Vec<DerivedRow> = scope
                    .iter()
                    .filter_map(|&r| {
                        let vals: Option<Vec<f64>> = attrs.iter().map(|&a| state.number(r, a)).collect();
                        vals.map(|v| DerivedRow {
                            category: cat(state.category(r)),
                            time: state.time(r),
                            value: combine(&v),
                        })
                    })
                    .collect();
                if out.is_empty() {
                    return Err(ExecError::MissingOperand("no visible rows carry every operand".into()));
                }
                Ok((y_name, out))
            }
        }
        DeriveKind::Trend => {
            if all_choices {
                let rows = series_rows(&choice_of(&resolved[0]))?;
                let out = rows
                    .iter()
                    .map(|&r| DerivedRow {
                        category: Some(name.to_string()),
                        time: state.time(r),
                        value: state.y_value(r).unwrap_or(0.0),
                    })
                    .collect();
                Ok((y_name, out))
            } else {
                let a = quantitative(&resolved[0])?;
                let scope = attribute_scope(state);
                let cat = category_for(&scope);
                let out: Vec<DerivedRow> = scope
                    .iter()
                    .filter_map(|&r| {
                        state.number(r, a).map(|v| DerivedRow {
                            category: cat(state.category(r)),
                            time: state.time(r),
                            value: v,
                        })
                    })
                    .collect();
                if out.is_empty() {
                    return Err(ExecError::MissingOperand("no visible values to follow".into()));
                }
                let measure = state.spec.attributes[a].name.clone();
                Ok((measure, out))
            }
        }
        DeriveKind::Rank => {
            let a = quantitative(&resolved[0])?;
            let scope = attribute_scope(state);
            let values: Vec<(RowId, f64)> = scope
                .iter()
                .filter_map(|&r| state.number(r, a).map(|v| (r, v)))
                .collect();
            if values.is_empty() {
                return Err(ExecError::MissingOperand("nothing visible to rank".into()));
            }
            let descending = !matches!(spec.direction, Some(crate::task::Direction::Bottom));
            let ranks = dense_rank(&values.iter().map(|(_, v)| *v).collect::<Vec<_>>(), descending);
            let out = values
                .iter()
                .zip(ranks)
                .map(|(&(r, _), rank)| DerivedRow {
                    category: state.category(r),
                    time: state.time(r),
                    value: rank as f64,
                })
                .collect();
            Ok((name.to_string(), out))
        }
        DeriveKind::Growth => {
            let a = quantitative(&resolved[0])?;
            let scope = attribute_scope(state);
            let mut by_cat: BTreeMap<Option<String>, Vec<(i64, f64)>> = BTreeMap::new();
            for &r in &scope {
                if let (Some(v), Some(t)) = (state.number(r, a), state.time(r)) {
                    by_cat
                        .entry(state.category(r))
                        .or_default()
                        .push((t.start_ordinal(), v));
                }
            }
            let mut out = Vec::new();
            for (cat, mut pts) in by_cat {
                pts.sort_by_key(|p| p.0);
                let (first, last) = (pts[0].1, pts[pts.len() - 1].1);
                let value = match growth {
                    GrowthMode::Ratio if first != 0.0 => last / first,
                    GrowthMode::Ratio => continue,
                    GrowthMode::Delta => last - first,
                };
                out.push(DerivedRow {
                    category: cat,
                    time: None,
                    value,
                });
            }
            if out.is_empty() {
                return Err(ExecError::MissingOperand(
                    "no temporal series to measure growth on".into(),
                ));
            }
            Ok((name.to_string(), out))
        }
    }
}

/// 1-based dense ranks of `values`; descending puts the largest first.
pub fn dense_rank(values: &[f64], descending: bool) -> Vec<u32> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| if descending { b.total_cmp(a) } else { a.total_cmp(b) });
    distinct.dedup();
    values
        .iter()
        .map(|v| distinct.iter().position(|d| d == v).expect("value present") as u32 + 1)
        .collect()
}
