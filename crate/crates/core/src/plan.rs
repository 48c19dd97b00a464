//! Compiles tasks into ordered manipulation plans.
//!
//! Plans are built bottom-up: filter steps first (highlight for small
//! categorical selections, reduce and rescale for ranges), then re-encoding
//! when the current mark cannot answer the task, then derivations, then the
//! identification output (highlights and annotations). Every step is applied
//! to a working copy of the chart as it is emitted, so a plan is executable
//! by construction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{
    query_rows_with, Anchor, AttrType, Axis, ChartError, ChartState, Guideline, Intensity, Mark, ResolveOptions,
    ResolvedFilter, ResolvedValue, Resolver, RowId,
};
use crate::exec::{apply_manip, data_extent, default_derive_name, ExecError};
use crate::manip::{format_value, GrowthMode, Manip, ManipStep, Origin, RearrangeMode};
use crate::task::{
    validate, AggregateFn, AggregateSpec, DeriveKind, DeriveSpec, Direction, Filter, FilterOp, FilterValue, Target,
    Task, TaskKind,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("task cannot be planned: {0}")]
    Unplannable(String),
    #[error("empty selection: {0}")]
    EmptySelection(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "camelCase")]
pub enum ReencodeRule {
    /// Sums and trends over at least `min_series` series are shown as a
    /// stacked area instead of overlapping lines.
    StackManySeries { min_series: usize },
    /// Rankings and identifications at a single time point on a line or
    /// area chart are shown as bars.
    BarAtSinglePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct PlanPolicy {
    pub highlight_threshold: f64,
    pub context_padding: f64,
    /// Temporal selections narrower than this fraction of the full span get
    /// `context_padding` on both sides.
    pub narrow_fraction: f64,
    /// Identifications selecting at most this many rows annotate each one.
    pub annotate_limit: usize,
    pub reencode_rules: Vec<ReencodeRule>,
    pub growth: GrowthMode,
    pub synonyms: bool,
}

impl Default for PlanPolicy {
    fn default() -> Self {
        PlanPolicy {
            highlight_threshold: 0.5,
            context_padding: 0.1,
            narrow_fraction: 0.05,
            annotate_limit: 3,
            reencode_rules: vec![
                ReencodeRule::StackManySeries { min_series: 3 },
                ReencodeRule::BarAtSinglePoint,
            ],
            growth: GrowthMode::Ratio,
            synonyms: true,
        }
    }
}

impl PlanPolicy {
    fn stack_min(&self) -> Option<usize> {
        self.reencode_rules.iter().find_map(|r| match r {
            ReencodeRule::StackManySeries { min_series } => Some(*min_series),
            _ => None,
        })
    }

    fn bar_at_point(&self) -> bool {
        self.reencode_rules.contains(&ReencodeRule::BarAtSinglePoint)
    }
}

pub fn plan(task: &Task, state: &ChartState, policy: &PlanPolicy) -> Result<Vec<ManipStep>, PlanError> {
    let violations = validate(task);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(PlanError::Unplannable(msgs.join("; ")));
    }
    let mut p = Planner::new(state, policy);
    if task.kind == TaskKind::Compare {
        p.comparison(task)?;
    } else {
        p.simple(task)?;
    }
    Ok(p.steps)
}

pub fn plan_filter(filter: &Filter, state: &ChartState, policy: &PlanPolicy) -> Result<Vec<ManipStep>, PlanError> {
    let mut p = Planner::new(state, policy);
    p.filters(std::slice::from_ref(filter), false)?;
    Ok(p.steps)
}

pub fn plan_derivation(
    spec: &DeriveSpec,
    state: &ChartState,
    policy: &PlanPolicy,
) -> Result<Vec<ManipStep>, PlanError> {
    let mut p = Planner::new(state, policy);
    let involved = p.involved_series(spec)?;
    if matches!(spec.kind, DeriveKind::Sum | DeriveKind::Trend) && p.wants_stack(involved) {
        p.stack()?;
    } else {
        p.derive(spec, Origin::Derive)?;
    }
    Ok(p.steps)
}

pub fn plan_aggregation(
    spec: &AggregateSpec,
    rows: &BTreeSet<RowId>,
    state: &ChartState,
) -> Result<Vec<ManipStep>, PlanError> {
    let policy = PlanPolicy::default();
    let mut p = Planner::new(state, &policy);
    p.annotate_aggregate(spec, rows)?;
    Ok(p.steps)
}

pub fn plan_comparison(task: &Task, state: &ChartState, policy: &PlanPolicy) -> Result<Vec<ManipStep>, PlanError> {
    if task.kind != TaskKind::Compare {
        return Err(PlanError::Unplannable("not a comparison".into()));
    }
    plan(task, state, policy)
}

struct Planner<'p> {
    policy: &'p PlanPolicy,
    state: ChartState,
    steps: Vec<ManipStep>,
    highlighted: bool,
    planned_filters: BTreeSet<String>,
}

fn is_superlative(f: &Filter) -> bool {
    matches!(&f.value, FilterValue::Aggregate(a) if f.op == FilterOp::Eq && matches!(a.aggregate, AggregateFn::Max | AggregateFn::Min))
}

impl<'p> Planner<'p> {
    fn new(state: &ChartState, policy: &'p PlanPolicy) -> Self {
        Planner {
            policy,
            state: state.clone(),
            steps: Vec::new(),
            highlighted: false,
            planned_filters: BTreeSet::new(),
        }
    }

    fn resolver(&self) -> Resolver<'_> {
        Resolver::for_state(&self.state).with_options(ResolveOptions {
            synonyms: self.policy.synonyms,
        })
    }

    fn query(&self, filters: &[Filter]) -> Result<BTreeSet<RowId>, PlanError> {
        Ok(query_rows_with(filters, &self.state, &self.resolver())?)
    }

    fn push(&mut self, manip: Manip, origin: Origin) -> Result<(), PlanError> {
        let duplicate = self.steps.iter().any(|s| match (&s.manip, &manip) {
            (
                Manip::Highlight {
                    rows: a, intensity: ia, ..
                },
                Manip::Highlight {
                    rows: b, intensity: ib, ..
                },
            ) => a == b && ia == ib,
            (a, b) => a == b,
        });
        if duplicate {
            return Ok(());
        }
        self.state = apply_manip(&manip, &self.state)?;
        self.steps.push(ManipStep::new(manip, origin));
        Ok(())
    }

    fn highlight(&mut self, rows: BTreeSet<RowId>, origin: Origin) -> Result<(), PlanError> {
        let reset = !self.highlighted;
        self.highlighted = true;
        self.push(
            Manip::Highlight {
                rows,
                intensity: Intensity::Focus,
                reset,
            },
            origin,
        )
    }

    fn visible_base(&self) -> BTreeSet<RowId> {
        self.state
            .view
            .visible_rows
            .iter()
            .copied()
            .filter(|&r| !self.state.is_derived(r))
            .collect()
    }

    fn simple(&mut self, task: &Task) -> Result<(), PlanError> {
        if task.kind == TaskKind::Trend && self.state.spec.temporal_index().is_none() {
            return Err(PlanError::Unplannable("trend requires a temporal attribute".into()));
        }
        let rankish = task.filters.iter().any(Filter::is_rank)
            || task.derive.as_ref().is_some_and(|d| d.kind == DeriveKind::Rank)
            || task.kind == TaskKind::Identify;
        let expect_bar = rankish && self.policy.bar_at_point() && self.state.mark() != Mark::Bar;
        self.filters(&task.filters, expect_bar)?;

        let mut derive = task.derive.clone();
        if let Some(d) = &task.derive {
            if matches!(task.kind, TaskKind::Trend | TaskKind::Sum)
                && matches!(d.kind, DeriveKind::Trend | DeriveKind::Sum)
            {
                let involved = self.involved_series(d)?;
                if self.wants_stack(involved) {
                    self.stack()?;
                    derive = None;
                }
            }
        }
        if rankish && self.policy.bar_at_point() && self.single_time_point() {
            self.push(Manip::Reencode { target_mark: Mark::Bar }, Origin::Encoding)?;
        }
        if let Some(d) = &derive {
            self.derive(d, Origin::Derive)?;
        }
        match task.kind {
            TaskKind::Identify => {
                self.prepare_identify(task)?;
                self.identify(task)?;
            }
            TaskKind::Aggregate => {
                let Some(Target::Aggregate(agg)) = &task.target else {
                    return Err(PlanError::Unplannable("aggregate task without aggregate target".into()));
                };
                let rows = self.aggregate_rows(task)?;
                self.annotate_aggregate(agg, &rows)?;
            }
            _ => {}
        }
        Ok(())
    }

    fn comparison(&mut self, task: &Task) -> Result<(), PlanError> {
        for sub in &task.subtasks {
            self.filters(&sub.filters, false)?;
        }
        if self.state.view.stacked {
            self.push(
                Manip::Rearrange {
                    mode: RearrangeMode::Align,
                    key: None,
                    ascending: None,
                },
                Origin::Encoding,
            )?;
        }
        if let Some(d) = &task.derive {
            self.derive(d, Origin::Derive)?;
        }
        for sub in &task.subtasks {
            self.prepare_identify(sub)?;
        }
        for sub in &task.subtasks {
            self.identify(sub)?;
        }
        Ok(())
    }

    /// Plain filters in presentation order: categorical selections, then
    /// temporal, then quantitative. Aggregate and rank filters select the
    /// answer and are handled by identification.
    fn filters(&mut self, filters: &[Filter], expect_bar: bool) -> Result<(), PlanError> {
        let mut ordered: Vec<(u8, &Filter, ResolvedFilter)> = Vec::new();
        for f in filters {
            if !self.planned_filters.insert(filter_text(f)) {
                continue;
            }
            let rf = ResolvedFilter::resolve(f, &self.resolver())?;
            let rank = match (&rf.value, self.state.spec.attributes[rf.attr].kind) {
                (ResolvedValue::Aggregate { .. } | ResolvedValue::Rank { .. }, _) => continue,
                (_, AttrType::Categorical) => 0,
                (_, AttrType::Temporal) => 1,
                (_, AttrType::Quantitative) => 2,
            };
            ordered.push((rank, f, rf));
        }
        ordered.sort_by_key(|(rank, _, _)| *rank);
        for (_, f, rf) in ordered {
            let rows = self.query(std::slice::from_ref(f))?;
            if rows == self.state.view.visible_rows {
                continue;
            }
            let kind = self.state.spec.attributes[rf.attr].kind;
            match kind {
                AttrType::Categorical => {
                    if rows.is_empty() {
                        return Err(PlanError::EmptySelection(format!(
                            "no visible rows match `{}`",
                            filter_text(f)
                        )));
                    }
                    let values = |set: &BTreeSet<RowId>| -> BTreeSet<String> {
                        set.iter()
                            .filter_map(|&r| self.state.value(r, rf.attr).map(|v| v.to_string()))
                            .collect()
                    };
                    let total = values(&self.state.view.visible_rows).len().max(1);
                    let selected = values(&rows).len();
                    if (selected as f64) / (total as f64) <= self.policy.highlight_threshold {
                        self.highlight(rows, Origin::Filter)?;
                    } else {
                        self.push(Manip::Reduce { keep_rows: rows }, Origin::Filter)?;
                    }
                }
                AttrType::Temporal => {
                    if rows.is_empty() {
                        return Err(PlanError::EmptySelection(format!(
                            "no visible rows match `{}`",
                            filter_text(f)
                        )));
                    }
                    self.push(
                        Manip::Reduce {
                            keep_rows: rows.clone(),
                        },
                        Origin::Filter,
                    )?;
                    if self.state.x_is_temporal() {
                        self.rescale_x(&rows, expect_bar)?;
                    }
                }
                AttrType::Quantitative => match rf.value {
                    ResolvedValue::NumberRange(..) => {
                        if rows.is_empty() {
                            return Err(PlanError::EmptySelection(format!(
                                "no visible rows match `{}`",
                                filter_text(f)
                            )));
                        }
                        self.push(Manip::Reduce { keep_rows: rows }, Origin::Filter)?;
                        let fitted = self.state.fitted_domains(&self.state.view.visible_rows);
                        if let Some(y) = fitted.get(&Axis::Y) {
                            if self.state.view.axis_domains.get(&Axis::Y) != Some(y) {
                                self.push(
                                    Manip::Rescale {
                                        axis: Axis::Y,
                                        domain: *y,
                                    },
                                    Origin::Filter,
                                )?;
                            }
                        }
                    }
                    _ if !rows.is_empty() => self.highlight(rows, Origin::Filter)?,
                    _ => {}
                },
            }
        }
        Ok(())
    }

    fn rescale_x(&mut self, rows: &BTreeSet<RowId>, expect_bar: bool) -> Result<(), PlanError> {
        let Some([lo, hi]) = data_extent(&self.state, rows, Axis::X) else {
            return Ok(());
        };
        let spec = &self.state.spec;
        let full = spec.attributes[spec.x_index()]
            .span
            .map(|[a, b]| b.axis_position() - a.axis_position())
            .unwrap_or(0.0);
        let single = lo == hi;
        let mut domain = [lo, hi];
        if full > 0.0 && (hi - lo) < self.policy.narrow_fraction * full && !(single && expect_bar) {
            let pad = self.policy.context_padding * full;
            domain = [lo - pad, hi + pad];
        }
        if self.state.view.axis_domains.get(&Axis::X) == Some(&domain) {
            return Ok(());
        }
        self.push(Manip::Rescale { axis: Axis::X, domain }, Origin::Filter)
    }

    fn single_time_point(&self) -> bool {
        if self.state.mark() == Mark::Bar || !self.state.x_is_temporal() {
            return false;
        }
        let keys: BTreeSet<_> = self
            .state
            .view
            .visible_rows
            .iter()
            .filter(|&&r| self.state.is_plotted(r))
            .map(|&r| self.state.x_key(r))
            .collect();
        keys.len() == 1
    }

    fn involved_series(&self, d: &DeriveSpec) -> Result<usize, PlanError> {
        let resolver = self.resolver();
        let mut choices = 0;
        for op in &d.operands {
            if let crate::chart::Resolved::Choice { .. } = resolver.resolve(op)? {
                choices += 1;
            }
        }
        if choices > 0 {
            return Ok(choices);
        }
        let focused: BTreeSet<RowId> = self
            .state
            .focused_rows()
            .into_iter()
            .filter(|r| self.state.view.visible_rows.contains(r) && !self.state.is_derived(*r))
            .collect();
        let scope = if focused.is_empty() {
            self.visible_base()
        } else {
            focused
        };
        Ok(scope
            .iter()
            .filter_map(|&r| self.state.category(r))
            .collect::<BTreeSet<_>>()
            .len())
    }

    fn wants_stack(&self, involved: usize) -> bool {
        self.policy.stack_min().is_some_and(|m| involved >= m)
    }

    fn stack(&mut self) -> Result<(), PlanError> {
        if self.state.mark() == Mark::Line {
            self.push(
                Manip::Reencode {
                    target_mark: Mark::Area,
                },
                Origin::Encoding,
            )?;
        }
        if !self.state.view.stacked {
            self.push(
                Manip::Rearrange {
                    mode: RearrangeMode::Stack,
                    key: None,
                    ascending: None,
                },
                Origin::Encoding,
            )?;
        }
        Ok(())
    }

    fn normalized(&self, d: &DeriveSpec) -> Option<DeriveSpec> {
        let r = self.resolver();
        let operands = d
            .operands
            .iter()
            .map(|o| r.normalize(o).ok())
            .collect::<Option<Vec<_>>>()?;
        let mut out = DeriveSpec {
            kind: d.kind,
            operands,
            direction: d.direction,
        };
        if out.kind == DeriveKind::Sum {
            out.operands.sort_by_cached_key(crate::task::text::attr_to_string);
        }
        if out.kind == DeriveKind::Rank && out.direction.is_none() {
            out.direction = Some(Direction::Top);
        }
        Some(out)
    }

    /// Index of an existing derived series computed from the same
    /// derivation, if any.
    fn existing_derived(&self, d: &DeriveSpec) -> Option<usize> {
        let want = self.normalized(d)?;
        self.state
            .view
            .derived_series
            .iter()
            .position(|s| self.normalized(&s.provenance).as_ref() == Some(&want))
    }

    fn derive(&mut self, d: &DeriveSpec, origin: Origin) -> Result<(), PlanError> {
        if self.existing_derived(d).is_some() {
            return Ok(());
        }
        let base = default_derive_name(d);
        let mut name = base.clone();
        let mut n = 2;
        while self.state.derived_index(&name).is_some() {
            name = format!("{base} {n}");
            n += 1;
        }
        self.push(
            Manip::Derive {
                spec: d.clone(),
                name: name.clone(),
                growth: self.policy.growth,
            },
            origin,
        )?;
        if matches!(d.kind, DeriveKind::Sum | DeriveKind::Difference) {
            let i = self.state.derived_index(&name).expect("just derived");
            let rows: BTreeSet<RowId> = self.state.derived_row_ids(i).collect();
            self.highlight(rows, origin)?;
        }
        Ok(())
    }

    /// Derivations an identification depends on, emitted before any
    /// identification output.
    fn prepare_identify(&mut self, task: &Task) -> Result<(), PlanError> {
        for f in task.filters.iter().filter(|f| f.is_rank()) {
            if matches!(f.direction, Some(Direction::Top | Direction::Bottom)) {
                let d =
                    DeriveSpec::new(DeriveKind::Rank, vec![f.attr.clone()]).with_direction(f.direction.expect("rank"));
                self.derive(&d, Origin::Derive)?;
            }
        }
        Ok(())
    }

    fn label(&self, row: RowId) -> String {
        let v = self.state.y_value(row).map(format_value).unwrap_or_default();
        match self.state.category(row) {
            Some(c) => format!("{c}: {v}"),
            None => v,
        }
    }

    fn identify(&mut self, task: &Task) -> Result<(), PlanError> {
        let rows = self.query(&task.filters)?;
        if rows.is_empty() {
            return Err(PlanError::EmptySelection("no visible rows answer the query".into()));
        }
        if task.filters.iter().any(Filter::is_rank) {
            return self.highlight(rows, Origin::Identify);
        }
        if task.filters.iter().any(is_superlative) {
            for r in rows.into_iter().take(self.policy.annotate_limit) {
                self.annotate_row(r)?;
            }
            return Ok(());
        }
        let threshold = task.filters.iter().find_map(|f| match &f.value {
            FilterValue::Aggregate(a) if f.op != FilterOp::Eq => Some(a.clone()),
            _ => None,
        });
        if let Some(agg) = threshold {
            let scope_filters: Vec<Filter> = task
                .filters
                .iter()
                .filter(|f| !matches!(f.value, FilterValue::Aggregate(_)) && !f.is_rank())
                .cloned()
                .collect();
            let scope = self.query(&scope_filters)?;
            if rows != self.state.view.visible_rows {
                self.highlight(rows, Origin::Identify)?;
            }
            return self.annotate_aggregate(&agg, &scope);
        }
        if rows.len() <= self.policy.annotate_limit {
            for r in rows {
                self.annotate_row(r)?;
            }
        }
        Ok(())
    }

    fn annotate_row(&mut self, row: RowId) -> Result<(), PlanError> {
        let text = self.label(row);
        self.push(
            Manip::Annotate {
                anchor: Anchor::Row { row },
                text,
                guideline: None,
            },
            Origin::Annotate,
        )
    }

    /// Rows an aggregate is computed over: the rows of the task's derived
    /// series when it has one, otherwise the visible base rows matching the
    /// filters.
    fn aggregate_rows(&self, task: &Task) -> Result<BTreeSet<RowId>, PlanError> {
        let matching = self.query(&task.filters)?;
        if let Some(d) = &task.derive {
            let i = self
                .existing_derived(d)
                .ok_or_else(|| PlanError::Unplannable("derivation was not applied".into()))?;
            let ids: BTreeSet<RowId> = self.state.derived_row_ids(i).collect();
            return Ok(matching.intersection(&ids).copied().collect());
        }
        Ok(matching.into_iter().filter(|&r| !self.state.is_derived(r)).collect())
    }

    fn annotate_aggregate(&mut self, spec: &AggregateSpec, rows: &BTreeSet<RowId>) -> Result<(), PlanError> {
        let attr = self.resolver().quantitative(&spec.attribute)?;
        let values: Vec<(RowId, f64)> = rows
            .iter()
            .filter_map(|&r| self.state.number(r, attr).map(|v| (r, v)))
            .collect();
        let Some(value) = spec
            .aggregate
            .apply(&values.iter().map(|(_, v)| *v).collect::<Vec<_>>())
        else {
            return Err(PlanError::EmptySelection("nothing to aggregate".into()));
        };
        let text = format!("{}: {}", spec.aggregate.as_str(), format_value(value));
        let manip = match spec.aggregate {
            AggregateFn::Max | AggregateFn::Min => {
                let row = values
                    .iter()
                    .find(|(_, v)| *v == value)
                    .map(|(r, _)| *r)
                    .expect("attained");
                Manip::Annotate {
                    anchor: Anchor::Row { row },
                    text,
                    guideline: None,
                }
            }
            AggregateFn::Avg | AggregateFn::Sum => {
                let x = data_extent(&self.state, rows, Axis::X)
                    .map(|[a, b]| (a + b) / 2.0)
                    .unwrap_or(0.0);
                let [ylo, yhi] = self
                    .state
                    .view
                    .axis_domains
                    .get(&Axis::Y)
                    .copied()
                    .unwrap_or([value, value]);
                let (y, guideline) = if spec.aggregate == AggregateFn::Avg {
                    (value, Some(Guideline { axis: Axis::Y, value }))
                } else {
                    (value.clamp(ylo, yhi), None)
                };
                Manip::Annotate {
                    anchor: Anchor::Point { x, y },
                    text,
                    guideline,
                }
            }
        };
        self.push(manip, Origin::Annotate)
    }
}

fn filter_text(f: &Filter) -> String {
    crate::task::text::filter_to_string(f)
}
