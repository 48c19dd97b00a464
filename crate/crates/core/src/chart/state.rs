use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::{AttrType, ChartSpec, Mark, Value};
use crate::task::DeriveSpec;
use crate::time::Timestamp;

/// Index into the combined row space: base rows first, then derived rows in
/// the order their series were appended.
pub type RowId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    Focus,
    Dim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Anchor {
    Row { row: RowId },
    Point { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guideline {
    pub axis: Axis,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub anchor: Anchor,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guideline: Option<Guideline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<Timestamp>,
    pub value: f64,
}

/// Rows computed by a derive manipulation. When `measure` names the chart's
/// y attribute the series is drawn like any other series; otherwise (rank,
/// growth) its values label the marks of the rows they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedSeries {
    pub name: String,
    pub measure: String,
    pub rows: Vec<DerivedRow>,
    pub provenance: DeriveSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortKey {
    pub attribute: String,
    pub ascending: bool,
}

/// The mutable visual state of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct View {
    pub mark: Mark,
    pub visible_rows: BTreeSet<RowId>,
    pub highlights: BTreeMap<RowId, Intensity>,
    pub annotations: Vec<Annotation>,
    pub axis_domains: BTreeMap<Axis, [f64; 2]>,
    pub derived_series: Vec<DerivedSeries>,
    pub stacked: bool,
    pub aligned: bool,
    pub sort_key: Option<SortKey>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartState {
    pub spec: Arc<ChartSpec>,
    pub view: View,
}

/// Position of a row along the x axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum XKey {
    Time(i64),
    Category(String),
    None,
}

impl ChartState {
    /// All rows visible, nothing highlighted, domains fitted to the data.
    pub fn initial(spec: Arc<ChartSpec>) -> Self {
        let mut state = ChartState {
            view: View {
                mark: spec.mark,
                visible_rows: (0..spec.rows.len()).collect(),
                highlights: BTreeMap::new(),
                annotations: Vec::new(),
                axis_domains: BTreeMap::new(),
                derived_series: Vec::new(),
                stacked: false,
                aligned: false,
                sort_key: None,
            },
            spec,
        };
        state.view.axis_domains = state.fitted_domains(&state.view.visible_rows.clone());
        state
    }

    pub fn mark(&self) -> Mark {
        self.view.mark
    }

    pub fn base_len(&self) -> usize {
        self.spec.rows.len()
    }

    pub fn total_rows(&self) -> usize {
        self.base_len() + self.view.derived_series.iter().map(|s| s.rows.len()).sum::<usize>()
    }

    pub fn derived_row(&self, id: RowId) -> Option<(usize, &DerivedSeries, &DerivedRow)> {
        let mut offset = id.checked_sub(self.base_len())?;
        for (i, s) in self.view.derived_series.iter().enumerate() {
            if offset < s.rows.len() {
                return Some((i, s, &s.rows[offset]));
            }
            offset -= s.rows.len();
        }
        None
    }

    /// First row id of the derived series at `index`.
    pub fn derived_start(&self, index: usize) -> RowId {
        self.base_len()
            + self.view.derived_series[..index]
                .iter()
                .map(|s| s.rows.len())
                .sum::<usize>()
    }

    pub fn derived_row_ids(&self, index: usize) -> std::ops::Range<RowId> {
        let start = self.derived_start(index);
        start..start + self.view.derived_series[index].rows.len()
    }

    pub fn derived_index(&self, name: &str) -> Option<usize> {
        self.view.derived_series.iter().position(|s| s.name == name)
    }

    pub fn is_derived(&self, id: RowId) -> bool {
        id >= self.base_len()
    }

    /// Value of attribute `attr` in row `id`. Derived rows expose their
    /// category under the series attribute, their timestamp under the
    /// temporal attribute and their value under the measure they carry.
    pub fn value(&self, id: RowId, attr: usize) -> Option<Value> {
        if let Some(row) = self.spec.rows.get(id) {
            return row.get(attr).cloned();
        }
        let (_, series, row) = self.derived_row(id)?;
        let a = self.spec.attributes.get(attr)?;
        if Some(attr) == self.spec.series_index() {
            return row.category.clone().map(Value::Text);
        }
        match a.kind {
            AttrType::Temporal => row.time.map(Value::Time),
            AttrType::Quantitative if a.name == series.measure => Some(Value::Number(row.value)),
            _ => None,
        }
    }

    pub fn number(&self, id: RowId, attr: usize) -> Option<f64> {
        self.value(id, attr).and_then(|v| v.as_number())
    }

    pub fn category(&self, id: RowId) -> Option<String> {
        let s = self.spec.series_index()?;
        self.value(id, s).and_then(|v| v.as_text().map(str::to_string))
    }

    pub fn time(&self, id: RowId) -> Option<Timestamp> {
        let t = self.spec.temporal_index()?;
        self.value(id, t).and_then(|v| v.as_time())
    }

    pub fn y_value(&self, id: RowId) -> Option<f64> {
        self.number(id, self.spec.y_index())
    }

    /// Whether a row is drawn as part of a series (base rows and derived
    /// rows measured in the y attribute).
    pub fn is_plotted(&self, id: RowId) -> bool {
        self.y_value(id).is_some()
    }

    pub fn x_key(&self, id: RowId) -> XKey {
        let x = self.spec.x_index();
        match self.value(id, x) {
            Some(Value::Time(t)) => XKey::Time(t.start_ordinal()),
            Some(Value::Text(s)) => XKey::Category(s),
            _ => XKey::None,
        }
    }

    /// Continuous x position for temporal axes.
    pub fn x_position(&self, id: RowId) -> Option<f64> {
        let x = self.spec.x_index();
        self.value(id, x).and_then(|v| v.as_time()).map(|t| t.axis_position())
    }

    pub fn x_is_temporal(&self) -> bool {
        self.spec.attributes[self.spec.x_index()].kind == AttrType::Temporal
    }

    /// Series names in drawing order: declared choices, then the categories
    /// of derived series measured in the y attribute.
    pub fn series_order(&self) -> Vec<String> {
        let mut names = self.spec.series_names();
        let y = &self.spec.encodings.y;
        for s in &self.view.derived_series {
            if &s.measure != y {
                continue;
            }
            for r in &s.rows {
                if let Some(c) = &r.category {
                    if !names.contains(c) {
                        names.push(c.clone());
                    }
                }
            }
        }
        names
    }

    /// Series (categories) among the given rows, in drawing order.
    pub fn series_among(&self, rows: &BTreeSet<RowId>) -> Vec<String> {
        let present: BTreeSet<String> = rows.iter().filter_map(|&r| self.category(r)).collect();
        self.series_order()
            .into_iter()
            .filter(|s| present.contains(s))
            .collect()
    }

    /// Order of the categorical x axis, honouring the sort key.
    pub fn category_order(&self) -> Vec<String> {
        let x = self.spec.x_index();
        let mut cats: Vec<String> = if self.spec.attributes[x].kind == AttrType::Categorical {
            self.spec.attributes[x].choices.clone()
        } else {
            self.series_order()
        };
        let visible: BTreeSet<String> = self
            .view
            .visible_rows
            .iter()
            .filter_map(|&r| match self.x_key(r) {
                XKey::Category(c) => Some(c),
                _ => self.category(r),
            })
            .collect();
        cats.retain(|c| visible.contains(c));
        if let Some(key) = &self.view.sort_key {
            let score = |c: &str| self.sort_score(c, &key.attribute);
            cats.sort_by(|a, b| {
                let ord = score(a).partial_cmp(&score(b)).unwrap_or(Ordering::Equal);
                let ord = if key.ascending { ord } else { ord.reverse() };
                ord.then_with(|| a.cmp(b))
            });
        }
        cats
    }

    /// Value a category is sorted by: the sum of the key measure over its
    /// visible rows, or its derived value when the key names a derived
    /// series.
    pub fn sort_score(&self, category: &str, key: &str) -> f64 {
        if let Some(i) = self
            .view
            .derived_series
            .iter()
            .position(|s| s.measure == key || s.name == key)
        {
            let ids = self.derived_row_ids(i);
            return ids
                .filter(|&r| self.view.visible_rows.contains(&r))
                .filter_map(|r| self.derived_row(r).map(|(_, _, d)| d))
                .filter(|d| d.category.as_deref() == Some(category))
                .map(|d| d.value)
                .sum();
        }
        let Some(k) = self.spec.attr_index(key) else { return 0.0 };
        self.view
            .visible_rows
            .iter()
            .filter(|&&r| {
                self.category(r).as_deref() == Some(category) || self.x_key(r) == XKey::Category(category.to_string())
            })
            .filter_map(|&r| self.number(r, k))
            .sum()
    }

    /// Domains that cover the given rows: x in day ordinals when temporal,
    /// y from the data extent widened to zero for bars and areas and to every
    /// stacked interval when stacked.
    pub fn fitted_domains(&self, rows: &BTreeSet<RowId>) -> BTreeMap<Axis, [f64; 2]> {
        let mut out = BTreeMap::new();
        let xs: Vec<f64> = rows.iter().filter_map(|&r| self.x_position(r)).collect();
        if !xs.is_empty() {
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            out.insert(Axis::X, [lo, hi]);
        }
        let (mut lo, mut hi) = rows
            .iter()
            .filter_map(|&r| self.y_value(r))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo.is_finite() {
            if self.view.stacked {
                for [base, top] in super::stack_layout(self, rows).into_values() {
                    lo = lo.min(base).min(top);
                    hi = hi.max(base).max(top);
                }
            }
            if self.view.mark != Mark::Line {
                lo = lo.min(0.0);
                hi = hi.max(0.0);
            }
            out.insert(Axis::Y, [lo, hi]);
        }
        out
    }

    /// Grow the current domains so that they cover the visible data.
    pub fn widen_domains_to_fit(&mut self) {
        let needed = self.fitted_domains(&self.view.visible_rows);
        for (axis, [lo, hi]) in needed {
            let entry = self.view.axis_domains.entry(axis).or_insert([lo, hi]);
            entry[0] = entry[0].min(lo);
            entry[1] = entry[1].max(hi);
        }
    }

    pub fn focused_rows(&self) -> BTreeSet<RowId> {
        self.view
            .highlights
            .iter()
            .filter(|(_, i)| **i == Intensity::Focus)
            .map(|(r, _)| *r)
            .collect()
    }

    /// Effective intensity used by the renderer: unlisted rows are dimmed
    /// whenever something is in focus.
    pub fn intensity(&self, id: RowId) -> Option<Intensity> {
        match self.view.highlights.get(&id) {
            Some(i) => Some(*i),
            None if self.view.highlights.values().any(|i| *i == Intensity::Focus) => Some(Intensity::Dim),
            None => None,
        }
    }

    /// Canonical JSON of the view (the spec is immutable and not included).
    pub fn view_json(&self) -> String {
        serde_json::to_string(&self.view).expect("view serializes")
    }

    /// Hex SHA-256 of the canonical view JSON.
    pub fn state_hash(&self) -> String {
        let digest = Sha256::digest(self.view_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
