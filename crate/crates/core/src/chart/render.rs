use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use sha2::{Digest, Sha256};

use super::spec::Mark;
use super::stack_layout;
use super::state::{Anchor, Axis, ChartState, Intensity, RowId, XKey};
use crate::task::Channel;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

/// Stable id for a mark, derived from its series and x key so that the same
/// datum keeps its id across keyframes.
pub fn element_id(series: &str, x: &str) -> String {
    let digest = Sha256::digest(format!("{series}\u{1f}{x}").as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("m-{hex}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn f(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn x_label(key: &XKey, state: &ChartState, row: RowId) -> String {
    match key {
        XKey::Category(c) => c.clone(),
        XKey::Time(_) => state.time(row).map(|t| t.to_string()).unwrap_or_default(),
        XKey::None => String::new(),
    }
}

struct Frame {
    ydom: [f64; 2],
    xdom: [f64; 2],
    bands: Option<Vec<XKey>>,
}

impl Frame {
    fn plot_w() -> f64 {
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    }

    fn plot_h() -> f64 {
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    }

    fn band_width(&self) -> f64 {
        match &self.bands {
            Some(b) if !b.is_empty() => Self::plot_w() / b.len() as f64,
            _ => Self::plot_w(),
        }
    }

    fn px_x(&self, key: &XKey, pos: Option<f64>) -> f64 {
        if let Some(bands) = &self.bands {
            let i = bands.iter().position(|b| b == key).unwrap_or(0);
            return MARGIN_LEFT + (i as f64 + 0.5) * self.band_width();
        }
        let [lo, hi] = self.xdom;
        let p = pos.unwrap_or(lo);
        if hi > lo {
            MARGIN_LEFT + (p - lo) / (hi - lo) * Self::plot_w()
        } else {
            MARGIN_LEFT + Self::plot_w() / 2.0
        }
    }

    fn px_y(&self, v: f64) -> f64 {
        let [lo, hi] = self.ydom;
        if hi > lo {
            MARGIN_TOP + (hi - v) / (hi - lo) * Self::plot_h()
        } else {
            MARGIN_TOP + Self::plot_h() / 2.0
        }
    }
}

fn intensity_class(i: Option<Intensity>) -> &'static str {
    match i {
        Some(Intensity::Focus) => " focus",
        Some(Intensity::Dim) => " dim",
        None => "",
    }
}

/// Deterministic SVG rendering of a chart state.
pub fn render_svg(state: &ChartState) -> String {
    let spec = &state.spec;
    let visible: BTreeSet<RowId> = state
        .view
        .visible_rows
        .iter()
        .copied()
        .filter(|&r| state.is_plotted(r))
        .collect();
    let mark = state.view.mark;
    let categorical_x = !state.x_is_temporal();
    let bands = if mark == Mark::Bar || categorical_x {
        let mut keys: Vec<XKey> = visible
            .iter()
            .map(|&r| state.x_key(r))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if categorical_x {
            let order = state.category_order();
            keys.sort_by_key(|k| match k {
                XKey::Category(c) => order.iter().position(|o| o == c).unwrap_or(usize::MAX),
                _ => usize::MAX,
            });
        }
        Some(keys)
    } else {
        None
    };
    let fallback = state.fitted_domains(&visible);
    let dom = |a: Axis| {
        state
            .view
            .axis_domains
            .get(&a)
            .or_else(|| fallback.get(&a))
            .copied()
            .unwrap_or([0.0, 1.0])
    };
    let frame = Frame {
        ydom: dom(Axis::Y),
        xdom: dom(Axis::X),
        bands,
    };
    let series = state.series_among(&visible);
    let all_series = state.series_order();
    let color_of = |s: &str| -> String {
        if let Some(v) = spec.channel_value_of(Channel::Color, s) {
            return v.to_string();
        }
        let i = all_series.iter().position(|x| x == s).unwrap_or(0);
        PALETTE[i % PALETTE.len()].to_string()
    };
    let layout = if state.view.stacked {
        Some(stack_layout(state, &visible))
    } else {
        None
    };
    let span = |r: RowId| -> [f64; 2] {
        match &layout {
            Some(l) => l.get(&r).copied().unwrap_or([0.0, 0.0]),
            None => [0.0, state.y_value(r).unwrap_or(0.0)],
        }
    };
    let any_focus = state.view.highlights.values().any(|i| *i == Intensity::Focus);

    let mut out = String::new();
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" data-mark="{mark}">"#,
        w = WIDTH,
        h = HEIGHT
    );
    out.push_str(
        "<style>.dim{opacity:0.2}.focus{opacity:1;stroke-width:3}.guideline{stroke:#555;stroke-dasharray:4 3}.derived{stroke-dasharray:6 2}</style>",
    );
    let _ = write!(
        out,
        r#"<defs><clipPath id="plot-area"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath></defs>"#,
        f(MARGIN_LEFT),
        f(MARGIN_TOP),
        f(Frame::plot_w()),
        f(Frame::plot_h())
    );

    // axes
    let y0 = MARGIN_TOP + Frame::plot_h();
    let _ = write!(
        out,
        r##"<g class="axes"><line class="axis x" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#333"/><line class="axis y" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#333"/>"##,
        f(MARGIN_LEFT),
        f(y0),
        f(WIDTH - MARGIN_RIGHT),
        f(y0),
        f(MARGIN_LEFT),
        f(MARGIN_TOP),
        f(MARGIN_LEFT),
        f(y0)
    );
    let _ = write!(
        out,
        r#"<text class="axis-title x" x="{}" y="{}" text-anchor="middle">{}</text><text class="axis-title y" x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">{}</text>"#,
        f(MARGIN_LEFT + Frame::plot_w() / 2.0),
        f(HEIGHT - 8.0),
        escape(&spec.encodings.x),
        f(MARGIN_TOP + Frame::plot_h() / 2.0),
        f(MARGIN_TOP + Frame::plot_h() / 2.0),
        escape(&spec.encodings.y)
    );
    let [ylo, yhi] = frame.ydom;
    let _ = write!(
        out,
        r#"<text class="tick y" x="{}" y="{}" text-anchor="end">{}</text><text class="tick y" x="{}" y="{}" text-anchor="end">{}</text></g>"#,
        f(MARGIN_LEFT - 4.0),
        f(frame.px_y(yhi)),
        escape(&crate::task::format_number(yhi)),
        f(MARGIN_LEFT - 4.0),
        f(frame.px_y(ylo)),
        escape(&crate::task::format_number(ylo)),
    );

    out.push_str(r#"<g class="marks" clip-path="url(#plot-area)">"#);
    let mut by_series: BTreeMap<&str, Vec<RowId>> = BTreeMap::new();
    let mut no_series = Vec::new();
    let row_cats: BTreeMap<RowId, String> = visible
        .iter()
        .filter_map(|&r| state.category(r).map(|c| (r, c)))
        .collect();
    for &r in &visible {
        match row_cats.get(&r) {
            Some(c) => by_series.entry(c.as_str()).or_default().push(r),
            None => no_series.push(r),
        }
    }
    let group_of = |name: &str| -> Vec<RowId> {
        let mut rows = by_series.get(name).cloned().unwrap_or_default();
        rows.sort_by(|a, b| state.x_key(*a).cmp(&state.x_key(*b)).then(a.cmp(b)));
        rows
    };
    let mut groups: Vec<(String, Vec<RowId>)> = series.iter().map(|s| (s.clone(), group_of(s))).collect();
    if !no_series.is_empty() {
        groups.push((String::new(), no_series));
    }
    let n_groups = groups.len().max(1);
    for (gi, (name, rows)) in groups.iter().enumerate() {
        let color = color_of(name);
        let derived = rows.first().is_some_and(|&r| state.is_derived(r));
        let group_intensity = if rows
            .iter()
            .any(|r| state.view.highlights.get(r) == Some(&Intensity::Focus))
        {
            Some(Intensity::Focus)
        } else if any_focus
            || rows
                .iter()
                .any(|r| state.view.highlights.get(r) == Some(&Intensity::Dim))
        {
            Some(Intensity::Dim)
        } else {
            None
        };
        let sid = element_id(name, "");
        match mark {
            Mark::Line | Mark::Area if !(mark == Mark::Line && rows.len() < 2 && frame.bands.is_some()) => {
                let pts: Vec<(f64, f64, f64)> = rows
                    .iter()
                    .map(|&r| {
                        let [lo, hi] = span(r);
                        (
                            frame.px_x(&state.x_key(r), state.x_position(r)),
                            frame.px_y(hi),
                            frame.px_y(lo),
                        )
                    })
                    .collect();
                let mut d = String::new();
                for (i, (x, y, _)) in pts.iter().enumerate() {
                    let _ = write!(d, "{}{},{}", if i == 0 { "M" } else { "L" }, f(*x), f(*y));
                }
                if mark == Mark::Area {
                    for (x, _, b) in pts.iter().rev() {
                        let _ = write!(d, "L{},{}", f(*x), f(*b));
                    }
                    d.push('Z');
                }
                let fill = if mark == Mark::Area { color.as_str() } else { "none" };
                let _ = write!(
                    out,
                    r#"<path id="{sid}" class="mark {}{}{}" data-series="{}" d="{d}" fill="{fill}" stroke="{color}"/>"#,
                    mark.as_str(),
                    if derived { " derived" } else { "" },
                    intensity_class(group_intensity),
                    escape(name)
                );
                for &r in rows {
                    if state.view.highlights.get(&r) == Some(&Intensity::Focus) {
                        let [_, hi] = span(r);
                        let key = state.x_key(r);
                        let _ = write!(
                            out,
                            r#"<circle id="{}" class="point focus" cx="{}" cy="{}" r="3.5" fill="{color}"/>"#,
                            element_id(name, &x_label(&key, state, r)),
                            f(frame.px_x(&key, state.x_position(r))),
                            f(frame.px_y(hi))
                        );
                    }
                }
            }
            _ => {
                let bw = frame.band_width() * 0.8;
                let (w, offset) = if state.view.stacked || frame.bands.is_none() {
                    (bw, 0.0)
                } else {
                    (
                        bw / n_groups as f64,
                        -bw / 2.0 + bw / n_groups as f64 * (gi as f64 + 0.5),
                    )
                };
                for &r in rows {
                    let key = state.x_key(r);
                    let [lo, hi] = span(r);
                    let cx = frame.px_x(&key, state.x_position(r)) + offset;
                    let (top, bottom) = (frame.px_y(hi.max(lo)), frame.px_y(hi.min(lo)));
                    let _ = write!(
                        out,
                        r#"<rect id="{}" class="mark bar{}{}" data-series="{}" x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
                        element_id(name, &x_label(&key, state, r)),
                        if derived { " derived" } else { "" },
                        intensity_class(state.intensity(r)),
                        escape(name),
                        f(cx - w / 2.0),
                        f(top),
                        f(w),
                        f(bottom - top)
                    );
                }
            }
        }
    }
    out.push_str("</g>");

    // values of non-plotted derived series (rank, growth) label their marks
    let labels: Vec<(RowId, String)> = state
        .view
        .visible_rows
        .iter()
        .filter(|&&r| state.is_derived(r) && !state.is_plotted(r))
        .filter_map(|&r| {
            let (_, s, d) = state.derived_row(r)?;
            let target = visible.iter().copied().find(|&b| {
                !state.is_derived(b) && state.category(b) == d.category && (d.time.is_none() || state.time(b) == d.time)
            })?;
            let text = if s.provenance.kind == crate::task::DeriveKind::Rank {
                format!("#{}", crate::task::format_number(d.value))
            } else {
                crate::task::format_number(d.value)
            };
            Some((target, text))
        })
        .collect();
    if !labels.is_empty() {
        out.push_str(r#"<g class="derived-labels">"#);
        for (r, text) in labels {
            let [_, hi] = span(r);
            let _ = write!(
                out,
                r#"<text class="derived-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
                f(frame.px_x(&state.x_key(r), state.x_position(r))),
                f(frame.px_y(hi) - 6.0),
                escape(&text)
            );
        }
        out.push_str("</g>");
    }

    if !state.view.annotations.is_empty() {
        out.push_str(r#"<g class="annotations">"#);
        for a in &state.view.annotations {
            let (x, y) = match &a.anchor {
                Anchor::Row { row } => {
                    let [_, hi] = if state.view.stacked && visible.contains(row) {
                        span(*row)
                    } else {
                        [0.0, state.y_value(*row).unwrap_or(0.0)]
                    };
                    (frame.px_x(&state.x_key(*row), state.x_position(*row)), frame.px_y(hi))
                }
                Anchor::Point { x, y } => (frame.px_x(&XKey::None, Some(*x)), frame.px_y(*y)),
            };
            out.push_str(r#"<g class="annotation">"#);
            if let Some(g) = &a.guideline {
                match g.axis {
                    Axis::Y => {
                        let gy = frame.px_y(g.value);
                        let _ = write!(
                            out,
                            r#"<line class="guideline" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                            f(MARGIN_LEFT),
                            f(gy),
                            f(WIDTH - MARGIN_RIGHT),
                            f(gy)
                        );
                    }
                    Axis::X => {
                        let gx = frame.px_x(&XKey::None, Some(g.value));
                        let _ = write!(
                            out,
                            r#"<line class="guideline" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                            f(gx),
                            f(MARGIN_TOP),
                            f(gx),
                            f(y0)
                        );
                    }
                }
            }
            let _ = write!(
                out,
                r#"<text class="annotation-text" x="{}" y="{}">{}</text></g>"#,
                f(x + 6.0),
                f(y - 8.0),
                escape(&a.text)
            );
        }
        out.push_str("</g>");
    }
    out.push_str("</svg>");
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::chart::spec::{Attribute, ChartSpec, Encodings, Value};
    use crate::chart::state::{Annotation, Guideline};
    use crate::time::Timestamp;

    fn state(mark: Mark) -> ChartState {
        let mut rows = Vec::new();
        for c in ["coal", "gas", "solar"] {
            for y in 2018..2023 {
                rows.push(vec![
                    Value::Text(c.into()),
                    Value::Time(Timestamp::year(y)),
                    Value::Number((y - 2000) as f64 + c.len() as f64),
                ]);
            }
        }
        let spec = ChartSpec {
            attributes: vec![
                Attribute::categorical("energy", vec!["coal".into(), "gas".into(), "solar".into()]),
                Attribute::temporal("time", None),
                Attribute::quantitative("consumption", None),
            ],
            rows,
            mark,
            encodings: Encodings {
                x: "time".into(),
                y: "consumption".into(),
                color: Some("energy".into()),
            },
            channel_bindings: vec![],
        };
        ChartState::initial(Arc::new(spec))
    }

    #[test]
    fn one_path_per_category() {
        let svg = render_svg(&state(Mark::Line));
        assert_eq!(svg.matches("<path ").count(), 3);
        assert_eq!(svg, render_svg(&state(Mark::Line)));
    }

    #[test]
    fn stacked_areas_are_offset() {
        let mut st = state(Mark::Area);
        let flat = render_svg(&st);
        st.view.stacked = true;
        st.view.axis_domains = st.fitted_domains(&st.view.visible_rows);
        let stacked = render_svg(&st);
        assert_ne!(flat, stacked);
        assert_eq!(stacked.matches(r#"class="mark area"#).count(), 3);
    }

    #[test]
    fn one_annotation_one_text_and_guideline() {
        let mut st = state(Mark::Line);
        st.view.annotations.push(Annotation {
            anchor: Anchor::Row { row: 2 },
            text: "max <here>".into(),
            guideline: Some(Guideline {
                axis: Axis::Y,
                value: 20.0,
            }),
        });
        let svg = render_svg(&st);
        assert_eq!(svg.matches(r#"class="annotation-text""#).count(), 1);
        assert_eq!(svg.matches(r#"class="guideline""#).count(), 1);
        assert!(svg.contains("max &lt;here&gt;"));
    }

    #[test]
    fn highlight_classes_and_stable_ids() {
        let mut st = state(Mark::Bar);
        st.view.highlights.insert(0, Intensity::Focus);
        let svg = render_svg(&st);
        let id = element_id("coal", "2018");
        assert!(svg.contains(&format!(r#"id="{id}" class="mark bar focus""#)));
        assert_eq!(svg.matches(r#" dim""#).count(), 14);
    }
}
