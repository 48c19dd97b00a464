//! Chart specifications, chart states, reference resolution, row queries
//! and SVG rendering.

mod query;
mod render;
mod resolve;
mod spec;
mod state;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use query::{query_rows, query_rows_with, row_matches, ResolvedFilter, ResolvedValue};
pub use render::{element_id, render_svg};
pub use resolve::{resolve_attribute, resolve_task_refs, ResolveOptions, Resolved, Resolver};
pub use spec::{AttrType, Attribute, ChannelBinding, ChartSpec, Encodings, Mark, Value};
pub use state::{
    Anchor, Annotation, Axis, ChartState, DerivedRow, DerivedSeries, Guideline, Intensity, RowId, SortKey, View, XKey,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("inconsistent chart data: {0}")]
    Consistency(String),
    #[error("unresolvable reference `{0}`")]
    Unresolvable(String),
    #[error("ambiguous reference `{reference}`: candidates {candidates:?}")]
    Ambiguous { reference: String, candidates: Vec<String> },
    #[error("inconsistent reference `{0}`: name and channel disagree")]
    Inconsistent(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

/// Stacked layout: for each row, the `[base, top]` interval it occupies.
/// Series are stacked in drawing order so that every x position sums to the
/// same total as the unstacked values.
pub fn stack_layout(state: &ChartState, rows: &BTreeSet<RowId>) -> BTreeMap<RowId, [f64; 2]> {
    let order = state.series_order();
    let rank: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut plotted: Vec<(RowId, usize, f64)> = rows
        .iter()
        .filter_map(|&r| {
            let v = state.y_value(r)?;
            let series = state
                .category(r)
                .and_then(|c| rank.get(c.as_str()).copied())
                .unwrap_or(usize::MAX);
            Some((r, series, v))
        })
        .collect();
    plotted.sort_by_key(|&(r, s, _)| (s, r));
    let mut running: BTreeMap<XKey, f64> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for (r, _, v) in plotted {
        let base = running.entry(state.x_key(r)).or_insert(0.0);
        out.insert(r, [*base, *base + v]);
        *base += v;
    }
    out
}
