//! Query templates. Each template renders a question and builds its gold
//! task from the same random draws, so the pair is correct by construction.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AttributeCombo, GenError, NlTaskPair, ReferentStyle, Signature};
use crate::task::{
    canonicalize, AggregateFn, AttributeRef, Channel, DeriveKind, DeriveSpec, Direction, Filter, FilterOp, FilterValue,
    Literal, Task, TaskCategory, TaskKind,
};
use crate::time::{Granularity, Timestamp};
use crate::translate::lexicon::{ordinal_word, plural};

use Signature::{CQ, CQQ, CTQ};
use TaskCategory::{Aggregation, Comparison, Derivation, Identification};

pub struct Template {
    pub id: &'static str,
    pub category: TaskCategory,
    pub signatures: &'static [Signature],
    /// Accepts channel and mixed referents.
    pub styled: bool,
    /// Default sampling weight within the category.
    pub weight: f64,
    build: fn(&mut Inst) -> (String, Task),
}

impl Template {
    pub fn supports(&self, style: ReferentStyle) -> bool {
        self.styled || style == ReferentStyle::Name
    }
}

impl std::fmt::Debug for Template {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Template").field("id", &self.id).finish()
    }
}

pub(crate) struct Inst<'a> {
    combo: &'a AttributeCombo,
    style: ReferentStyle,
    rng: &'a mut ChaCha8Rng,
}

fn name(n: &str) -> AttributeRef {
    AttributeRef::name(n)
}

fn threshold(attr: &str, op: FilterOp, v: &str) -> Filter {
    Filter {
        attr: name(attr),
        op,
        value: FilterValue::Literal(Literal::text(v)),
        direction: None,
    }
}

fn series_of(text: &[String]) -> String {
    match text {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

/// Two significant digits, printed in literal form.
fn nice(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let mag = 10f64.powi(v.abs().log10().floor() as i32 - 1);
    let r = (v / mag).round() * mag;
    let text = format!("{:.*}", (-(mag.log10().round() as i32)).max(0) as usize, r);
    Literal::number(text.parse().expect("formatted number")).0
}

impl<'a> Inst<'a> {
    fn c(&self) -> String {
        self.combo.categorical().name.clone()
    }

    fn cp(&self) -> String {
        plural(&self.combo.categorical().name)
    }

    fn t(&self) -> String {
        self.combo
            .temporal()
            .expect("temporal template on CTQ combo")
            .name
            .clone()
    }

    fn noun(&self) -> &'static str {
        match self.combo.signature {
            CTQ => "line",
            _ => "bar",
        }
    }

    fn q(&mut self) -> String {
        let qs = self.combo.quantitative();
        qs.choose(self.rng).expect("combo has a measure").name.clone()
    }

    fn qq(&mut self) -> (String, String) {
        let mut qs: Vec<String> = self.combo.quantitative().iter().map(|a| a.name.clone()).collect();
        qs.shuffle(self.rng);
        (qs[0].clone(), qs[1].clone())
    }

    fn choices(&mut self, n: usize) -> Vec<String> {
        let mut all = self.combo.categorical().choices.clone();
        all.shuffle(self.rng);
        all.truncate(n);
        all
    }

    /// Phrase, filter and derive operand for one categorical value.
    fn referent(&self, choice: &str) -> (String, Filter, AttributeRef) {
        let color = self.combo.color_of(choice);
        match self.style {
            ReferentStyle::Name => (choice.to_string(), Filter::eq(name(&self.c()), choice), name(choice)),
            ReferentStyle::Channel => {
                let r = AttributeRef::channel(Channel::Color, color);
                (format!("the {color} {}", self.noun()), Filter::eq(r.clone(), color), r)
            }
            ReferentStyle::Mixed => {
                let r = AttributeRef::mixed(choice, Channel::Color, color);
                (
                    format!("{choice} (the {color} {})", self.noun()),
                    Filter::eq(r.clone(), choice),
                    r,
                )
            }
        }
    }

    fn one(&mut self) -> (String, Filter) {
        let c = self.choices(1).remove(0);
        let (text, filter, _) = self.referent(&c);
        (text, filter)
    }

    fn pair(&mut self) -> (String, [Filter; 2], [AttributeRef; 2]) {
        let cs = self.choices(2);
        let (ta, fa, oa) = self.referent(&cs[0]);
        let (tb, fb, ob) = self.referent(&cs[1]);
        let text = if self.style == ReferentStyle::Channel && self.rng.gen_bool(0.5) {
            format!(
                "the {} and {} {}s",
                self.combo.color_of(&cs[0]),
                self.combo.color_of(&cs[1]),
                self.noun()
            )
        } else {
            format!("{ta} and {tb}")
        };
        (text, [fa, fb], [oa, ob])
    }

    fn list(&mut self, n: usize) -> (String, Filter) {
        let cs = self.choices(n);
        (series_of(&cs), Filter::list(name(&self.c()), cs))
    }

    fn timeline(&self) -> Vec<Timestamp> {
        let [lo, hi] = self.combo.temporal().and_then(|t| t.span).expect("temporal span");
        Timestamp::series(lo, hi)
    }

    fn point(&mut self) -> (String, Filter) {
        let ts = *self.timeline().choose(self.rng).expect("nonempty timeline");
        let prep = if ts.granularity() == Granularity::Date {
            "on"
        } else {
            "in"
        };
        (
            format!("{prep} {}", ts.to_natural()),
            Filter::eq(name(&self.t()), ts.to_string()),
        )
    }

    fn range(&mut self) -> (String, Filter) {
        let line = self.timeline();
        let i = self.rng.gen_range(0..line.len() - 1);
        let j = self.rng.gen_range(i + 1..line.len());
        let (a, b) = (line[i], line[j]);
        (
            format!("from {} to {}", a.to_natural(), b.to_natural()),
            Filter::range(name(&self.t()), a.to_string(), b.to_string()),
        )
    }

    fn sup(&mut self) -> (&'static str, AggregateFn) {
        if self.rng.gen_bool(0.5) {
            ("highest", AggregateFn::Max)
        } else {
            ("lowest", AggregateFn::Min)
        }
    }

    fn extreme(&mut self, q: &str) -> (&'static str, Filter) {
        let (word, f) = self.sup();
        (word, Filter::aggregate(name(q), FilterOp::Eq, f, name(q)))
    }

    fn agg(&mut self) -> (&'static str, AggregateFn) {
        *[
            ("average", AggregateFn::Avg),
            ("maximum", AggregateFn::Max),
            ("minimum", AggregateFn::Min),
        ]
        .choose(self.rng)
        .expect("nonempty")
    }

    fn bounds(&self, q: &str) -> [f64; 2] {
        self.combo
            .quantitative()
            .into_iter()
            .find(|a| a.name == q)
            .and_then(|a| a.range)
            .expect("validated range")
    }

    fn value(&mut self, q: &str) -> String {
        let [lo, hi] = self.bounds(q);
        nice(lo + (hi - lo) * self.rng.gen_range(0.2..0.8))
    }

    fn band(&mut self, q: &str) -> (String, String) {
        let [lo, hi] = self.bounds(q);
        let a = nice(lo + (hi - lo) * self.rng.gen_range(0.1..0.4));
        let b = nice(lo + (hi - lo) * self.rng.gen_range(0.6..0.9));
        (a, b)
    }

    /// "greater than V" or "less than V" with its filter.
    fn cmp(&mut self, q: &str) -> (String, Filter) {
        let v = self.value(q);
        if self.rng.gen_bool(0.5) {
            (format!("greater than {v}"), threshold(q, FilterOp::Gt, &v))
        } else {
            (format!("less than {v}"), threshold(q, FilterOp::Lt, &v))
        }
    }

    fn band_text(&mut self, q: &str) -> (String, [Filter; 2]) {
        let (a, b) = self.band(q);
        (
            format!("greater than {a} and less than {b}"),
            [threshold(q, FilterOp::Gt, &a), threshold(q, FilterOp::Lt, &b)],
        )
    }
}

fn identify(target: &str, filters: impl IntoIterator<Item = Filter>) -> Task {
    let mut t = Task::identify(name(target));
    t.filters.extend(filters);
    t
}

fn rank(q: &str, op: FilterOp, k: u32, dir: Direction) -> (Filter, DeriveSpec) {
    (
        Filter::rank(name(q), op, k, dir),
        DeriveSpec::new(DeriveKind::Rank, vec![name(q)]).with_direction(dir),
    )
}

fn top_or_bottom(rng: &mut ChaCha8Rng) -> (&'static str, Direction) {
    if rng.gen_bool(0.7) {
        ("top", Direction::Top)
    } else {
        ("bottom", Direction::Bottom)
    }
}

fn compare(q: &str, ops: [AttributeRef; 2], own: [Filter; 2], shared: &[Filter]) -> Task {
    let mut t = Task::new(TaskKind::Compare)
        .with_target(name(q))
        .with_derive(DeriveSpec::new(DeriveKind::Difference, ops.to_vec()));
    for f in own {
        t = t.with_subtask(identify(q, std::iter::once(f).chain(shared.iter().cloned())));
    }
    t
}

fn aggregate(f: AggregateFn, q: &str, filters: impl IntoIterator<Item = Filter>) -> Task {
    let mut t = Task::new(TaskKind::Aggregate).with_aggregate_target(f, name(q));
    t.filters.extend(filters);
    t
}

fn derived(kind: TaskKind, q: &str, derive: DeriveSpec, filters: impl IntoIterator<Item = Filter>) -> Task {
    let mut t = Task::new(kind).with_target(name(q)).with_derive(derive);
    t.filters.extend(filters);
    t
}

const C_Q: &[Signature] = &[CQ, CQQ];
const T_Q: &[Signature] = &[CTQ];
const QQ: &[Signature] = &[CQQ];

macro_rules! template {
    ($id:literal, $cat:expr, $sigs:expr, $styled:literal, $w:literal, $build:expr) => {
        Template {
            id: $id,
            category: $cat,
            signatures: $sigs,
            styled: $styled,
            weight: $w,
            build: $build,
        }
    };
}

fn table() -> Vec<Template> {
    vec![
        // identification over a category
        template!("id-value", Identification, C_Q, true, 0.4, |s| {
            let q = s.q();
            let (r, f) = s.one();
            (format!("What is the {q} of {r}?"), identify(&q, [f]))
        }),
        template!("id-extreme", Identification, C_Q, false, 0.4, |s| {
            let (q, c) = (s.q(), s.c());
            let (w, f) = s.extreme(&q);
            (format!("Which {c} has the {w} {q}?"), identify(&c, [f]))
        }),
        template!("id-among-extreme", Identification, C_Q, false, 2.0, |s| {
            let (q, c) = (s.q(), s.c());
            let (l, lf) = s.list(3);
            let (w, f) = s.extreme(&q);
            (format!("Among {l}, which {c} has the {w} {q}?"), identify(&c, [lf, f]))
        }),
        template!("id-threshold", Identification, C_Q, false, 0.4, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let (p, f) = s.cmp(&q);
            (format!("Which {cp} have {q} {p}?"), identify(&c, [f]))
        }),
        template!("id-vs-average", Identification, C_Q, false, 0.3, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let (w, op) = if s.rng.gen_bool(0.5) {
                ("above", FilterOp::Gt)
            } else {
                ("below", FilterOp::Lt)
            };
            let f = Filter::aggregate(name(&q), op, AggregateFn::Avg, name(&q));
            (format!("Which {cp} have {q} {w} the average?"), identify(&c, [f]))
        }),
        template!("id-top-k", Identification, C_Q, false, 0.3, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let k = s.rng.gen_range(2..=3);
            let (w, dir) = top_or_bottom(s.rng);
            let (f, d) = rank(&q, FilterOp::Lt, k, dir);
            (
                format!("What are the {w} {k} {cp} by {q}?"),
                identify(&c, [f]).with_derive(d),
            )
        }),
        template!("id-ordinal", Identification, C_Q, false, 0.3, |s| {
            let (q, c) = (s.q(), s.c());
            let n = s.rng.gen_range(2..=3);
            let (w, dir) = if s.rng.gen_bool(0.5) {
                ("highest", Direction::Top)
            } else {
                ("lowest", Direction::Bottom)
            };
            let (f, d) = rank(&q, FilterOp::Eq, n, dir);
            let o = ordinal_word(n);
            (
                format!("Which {c} has the {o} {w} {q}?"),
                identify(&c, [f]).with_derive(d),
            )
        }),
        template!("id-among-threshold", Identification, C_Q, false, 1.5, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let (l, lf) = s.list(3);
            let (p, f) = s.cmp(&q);
            (format!("Among {l}, which {cp} have {q} {p}?"), identify(&c, [lf, f]))
        }),
        // identification over time
        template!("id-value-at", Identification, T_Q, true, 0.8, |s| {
            let q = s.q();
            let (r, f) = s.one();
            let (t, tf) = s.point();
            (format!("What is the {q} of {r} {t}?"), identify(&q, [f, tf]))
        }),
        template!("id-value-range", Identification, T_Q, true, 0.6, |s| {
            let q = s.q();
            let (r, f) = s.one();
            let (t, tf) = s.range();
            (format!("What is the {q} of {r} {t}?"), identify(&q, [f, tf]))
        }),
        template!("id-extreme-at", Identification, T_Q, false, 0.5, |s| {
            let (q, c) = (s.q(), s.c());
            let (w, f) = s.extreme(&q);
            let (t, tf) = s.point();
            (format!("Which {c} has the {w} {q} {t}?"), identify(&c, [tf, f]))
        }),
        template!("id-extreme-range", Identification, T_Q, false, 0.4, |s| {
            let (q, c) = (s.q(), s.c());
            let (w, f) = s.extreme(&q);
            let (t, tf) = s.range();
            (format!("Which {c} has the {w} {q} {t}?"), identify(&c, [tf, f]))
        }),
        template!("id-among-extreme-at", Identification, T_Q, false, 4.0, |s| {
            let (q, c) = (s.q(), s.c());
            let (l, lf) = s.list(3);
            let (w, f) = s.extreme(&q);
            let (t, tf) = s.point();
            (
                format!("Among {l}, which {c} has the {w} {q} {t}?"),
                identify(&c, [lf, tf, f]),
            )
        }),
        template!("id-among-extreme-range", Identification, T_Q, false, 2.5, |s| {
            let (q, c) = (s.q(), s.c());
            let (l, lf) = s.list(3);
            let (w, f) = s.extreme(&q);
            let (t, tf) = s.range();
            (
                format!("Among {l}, which {c} has the {w} {q} {t}?"),
                identify(&c, [lf, tf, f]),
            )
        }),
        template!("id-threshold-at", Identification, T_Q, false, 0.6, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let (p, f) = s.cmp(&q);
            let (t, tf) = s.point();
            (format!("Which {cp} have {q} {p} {t}?"), identify(&c, [tf, f]))
        }),
        template!("id-among-threshold-range", Identification, T_Q, false, 3.5, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let (l, lf) = s.list(3);
            let (p, f) = s.cmp(&q);
            let (t, tf) = s.range();
            (
                format!("Among {l}, which {cp} have {q} {p} {t}?"),
                identify(&c, [lf, tf, f]),
            )
        }),
        template!("id-among-band-at", Identification, T_Q, false, 6.0, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let (l, lf) = s.list(3);
            let (p, [f1, f2]) = s.band_text(&q);
            let (t, tf) = s.point();
            (
                format!("Among {l}, which {cp} have {q} {p} {t}?"),
                identify(&c, [lf, tf, f1, f2]),
            )
        }),
        template!("id-band-range", Identification, T_Q, false, 2.0, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let (p, [f1, f2]) = s.band_text(&q);
            let (t, tf) = s.range();
            (format!("Which {cp} have {q} {p} {t}?"), identify(&c, [tf, f1, f2]))
        }),
        template!("id-vs-average-at", Identification, T_Q, false, 0.3, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let f = Filter::aggregate(name(&q), FilterOp::Gt, AggregateFn::Avg, name(&q));
            let (t, tf) = s.point();
            (
                format!("Which {cp} have {q} above the average {t}?"),
                identify(&c, [tf, f]),
            )
        }),
        template!("id-top-k-at", Identification, T_Q, false, 0.3, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let k = s.rng.gen_range(2..=3);
            let (w, dir) = top_or_bottom(s.rng);
            let (f, d) = rank(&q, FilterOp::Lt, k, dir);
            let (t, tf) = s.point();
            (
                format!("What are the {w} {k} {cp} by {q} {t}?"),
                identify(&c, [tf, f]).with_derive(d),
            )
        }),
        template!("id-among-top-k-range", Identification, T_Q, false, 1.2, |s| {
            let (q, cp, c) = (s.q(), s.cp(), s.c());
            let (l, lf) = s.list(4);
            let k = s.rng.gen_range(2..=3);
            let (f, d) = rank(&q, FilterOp::Lt, k, Direction::Top);
            let (t, tf) = s.range();
            (
                format!("Among {l}, what are the top {k} {cp} by {q} {t}?"),
                identify(&c, [lf, tf, f]).with_derive(d),
            )
        }),
        template!("id-ordinal-at", Identification, T_Q, false, 0.3, |s| {
            let (q, c) = (s.q(), s.c());
            let n = s.rng.gen_range(2..=3);
            let (f, d) = rank(&q, FilterOp::Eq, n, Direction::Top);
            let (t, tf) = s.point();
            let o = ordinal_word(n);
            (
                format!("Which {c} has the {o} highest {q} {t}?"),
                identify(&c, [tf, f]).with_derive(d),
            )
        }),
        template!("id-when-extreme-range", Identification, T_Q, true, 2.0, |s| {
            let (q, tn) = (s.q(), s.t());
            let (r, f) = s.one();
            let (w, ef) = s.extreme(&q);
            let (t, tf) = s.range();
            (
                format!("In which {tn} {t} does {r} have the {w} {q}?"),
                identify(&tn, [f, tf, ef]),
            )
        }),
        template!("id-when-threshold-range", Identification, T_Q, true, 1.5, |s| {
            let (q, tn) = (s.q(), s.t());
            let (r, f) = s.one();
            let (p, pf) = s.cmp(&q);
            let (t, tf) = s.range();
            (
                format!("In which {tn} {t} did {r} have {q} {p}?"),
                identify(&tn, [f, tf, pf]),
            )
        }),
        // identification over two measures
        template!("id-extreme-given", Identification, QQ, false, 1.0, |s| {
            let ((q1, q2), c) = (s.qq(), s.c());
            let (w, f) = s.extreme(&q1);
            let (p, pf) = s.cmp(&q2);
            (
                format!("Which {c} has the {w} {q1} among those with {q2} {p}?"),
                identify(&c, [pf, f]),
            )
        }),
        template!("id-among-extreme-given", Identification, QQ, false, 2.5, |s| {
            let ((q1, q2), c) = (s.qq(), s.c());
            let (l, lf) = s.list(3);
            let (p, pf) = s.cmp(&q2);
            let (w, f) = s.extreme(&q1);
            (
                format!("Among {l}, which {c} with {q2} {p} has the {w} {q1}?"),
                identify(&c, [lf, pf, f]),
            )
        }),
        template!("id-among-band-given", Identification, QQ, false, 5.0, |s| {
            let ((q1, q2), c) = (s.qq(), s.c());
            let (l, lf) = s.list(3);
            let (p, [f1, f2]) = s.band_text(&q2);
            let (w, f) = s.extreme(&q1);
            (
                format!("Among {l}, which {c} with {q2} {p} has the {w} {q1}?"),
                identify(&c, [lf, f1, f2, f]),
            )
        }),
        template!("id-two-thresholds", Identification, QQ, false, 1.0, |s| {
            let ((q1, q2), cp, c) = (s.qq(), s.cp(), s.c());
            let v1 = s.value(&q1);
            let v2 = s.value(&q2);
            (
                format!("Which {cp} have {q1} greater than {v1} and {q2} less than {v2}?"),
                identify(
                    &c,
                    [threshold(&q1, FilterOp::Gt, &v1), threshold(&q2, FilterOp::Lt, &v2)],
                ),
            )
        }),
        // comparison
        template!("cmp", Comparison, C_Q, true, 0.2, |s| {
            let q = s.q();
            let (p, fs, ops) = s.pair();
            (
                format!("What is the difference of {q} between {p}?"),
                compare(&q, ops, fs, &[]),
            )
        }),
        template!("cmp-at", Comparison, T_Q, true, 1.4, |s| {
            let q = s.q();
            let (p, fs, ops) = s.pair();
            let (t, tf) = s.point();
            (
                format!("What is the difference of {q} between {p} {t}?"),
                compare(&q, ops, fs, &[tf]),
            )
        }),
        template!("cmp-range", Comparison, T_Q, true, 1.4, |s| {
            let q = s.q();
            let (p, fs, ops) = s.pair();
            let (t, tf) = s.range();
            (
                format!("What is the difference of {q} between {p} {t}?"),
                compare(&q, ops, fs, &[tf]),
            )
        }),
        // aggregation
        template!("agg-list", Aggregation, C_Q, false, 0.6, |s| {
            let q = s.q();
            let (w, f) = s.agg();
            let (l, lf) = s.list(3);
            (format!("What is the {w} {q} of {l}?"), aggregate(f, &q, [lf]))
        }),
        template!("agg-all", Aggregation, C_Q, false, 0.1, |s| {
            let (q, cp) = (s.q(), s.cp());
            let (w, f) = s.agg();
            (format!("What is the {w} {q} of all {cp}?"), aggregate(f, &q, []))
        }),
        template!("agg-given", Aggregation, QQ, false, 0.6, |s| {
            let ((q1, q2), cp) = (s.qq(), s.cp());
            let (w, f) = s.agg();
            let (p, pf) = s.cmp(&q2);
            (
                format!("What is the {w} {q1} of {cp} with {q2} {p}?"),
                aggregate(f, &q1, [pf]),
            )
        }),
        template!("agg-one-range", Aggregation, T_Q, true, 1.5, |s| {
            let q = s.q();
            let (w, f) = s.agg();
            let (r, rf) = s.one();
            let (t, tf) = s.range();
            (format!("What is the {w} {q} of {r} {t}?"), aggregate(f, &q, [rf, tf]))
        }),
        template!("agg-list-at", Aggregation, T_Q, false, 1.2, |s| {
            let q = s.q();
            let (w, f) = s.agg();
            let (l, lf) = s.list(3);
            let (t, tf) = s.point();
            (format!("What is the {w} {q} of {l} {t}?"), aggregate(f, &q, [lf, tf]))
        }),
        template!("agg-list-range", Aggregation, T_Q, false, 1.2, |s| {
            let q = s.q();
            let (w, f) = s.agg();
            let (l, lf) = s.list(3);
            let (t, tf) = s.range();
            (format!("What is the {w} {q} of {l} {t}?"), aggregate(f, &q, [lf, tf]))
        }),
        template!("agg-all-range", Aggregation, T_Q, false, 0.3, |s| {
            let q = s.q();
            let (w, f) = s.agg();
            let (t, tf) = s.range();
            (format!("What is the {w} {q} {t}?"), aggregate(f, &q, [tf]))
        }),
        template!("agg-list-range-above", Aggregation, T_Q, false, 3.0, |s| {
            let q = s.q();
            let (w, f) = s.agg();
            let (l, lf) = s.list(3);
            let (t, tf) = s.range();
            let v = s.value(&q);
            (
                format!("What is the {w} {q} of {l} {t}, counting only values above {v}?"),
                aggregate(f, &q, [lf, tf, threshold(&q, FilterOp::Gt, &v)]),
            )
        }),
        // derivation
        template!("sum", Derivation, C_Q, true, 0.3, |s| {
            let q = s.q();
            let (p, _, ops) = s.pair();
            let d = DeriveSpec::new(DeriveKind::Sum, ops.to_vec());
            (
                format!("What is the sum of {q} of {p}?"),
                derived(TaskKind::Sum, &q, d, []),
            )
        }),
        template!("sum-range", Derivation, T_Q, true, 1.0, |s| {
            let q = s.q();
            let (p, _, ops) = s.pair();
            let (t, tf) = s.range();
            let d = DeriveSpec::new(DeriveKind::Sum, ops.to_vec());
            (
                format!("What is the sum of {q} of {p} {t}?"),
                derived(TaskKind::Sum, &q, d, [tf]),
            )
        }),
        template!("sum-measures", Derivation, QQ, true, 1.0, |s| {
            let (q1, q2) = s.qq();
            let (r, rf) = s.one();
            let d = DeriveSpec::new(DeriveKind::Sum, vec![name(&q1), name(&q2)]);
            (
                format!("What is the sum of {q1} and {q2} of {r}?"),
                derived(TaskKind::Sum, &q1, d, [rf]),
            )
        }),
        template!("trend", Derivation, T_Q, true, 0.4, |s| {
            let q = s.q();
            let (r, rf) = s.one();
            let d = DeriveSpec::new(DeriveKind::Trend, vec![name(&q)]);
            (
                format!("What is the trend of the {q} of {r}?"),
                derived(TaskKind::Trend, &q, d, [rf]),
            )
        }),
        template!("trend-range", Derivation, T_Q, true, 1.5, |s| {
            let q = s.q();
            let (r, rf) = s.one();
            let (t, tf) = s.range();
            let d = DeriveSpec::new(DeriveKind::Trend, vec![name(&q)]);
            (
                format!("What is the trend of the {q} of {r} {t}?"),
                derived(TaskKind::Trend, &q, d, [rf, tf]),
            )
        }),
        template!("trend-all", Derivation, T_Q, false, 0.1, |s| {
            let (q, cp) = (s.q(), s.cp());
            let d = DeriveSpec::new(DeriveKind::Trend, vec![name(&q)]);
            (
                format!("What is the overall trend of {q} for all {cp}?"),
                derived(TaskKind::Trend, &q, d, []),
            )
        }),
        template!("trend-all-range", Derivation, T_Q, false, 0.4, |s| {
            let (q, cp) = (s.q(), s.cp());
            let (t, tf) = s.range();
            let d = DeriveSpec::new(DeriveKind::Trend, vec![name(&q)]);
            (
                format!("What is the overall trend of {q} for all {cp} {t}?"),
                derived(TaskKind::Trend, &q, d, [tf]),
            )
        }),
        template!("trend-list-range", Derivation, T_Q, false, 3.0, |s| {
            let q = s.q();
            let (l, lf) = s.list(3);
            let (t, tf) = s.range();
            let d = DeriveSpec::new(DeriveKind::Trend, vec![name(&q)]);
            (
                format!("What is the trend of the {q} of {l} {t}?"),
                derived(TaskKind::Trend, &q, d, [lf, tf]),
            )
        }),
    ]
}

/// The built-in template table.
pub fn templates() -> &'static [Template] {
    static TABLE: OnceLock<Vec<Template>> = OnceLock::new();
    TABLE.get_or_init(table)
}

pub fn template(id: &str) -> Option<&'static Template> {
    templates().iter().find(|t| t.id == id)
}

/// Fill `template` from `combo`. The gold task is canonical.
pub fn instantiate(
    template: &Template,
    combo: &AttributeCombo,
    style: ReferentStyle,
    rng: &mut ChaCha8Rng,
) -> Result<NlTaskPair, GenError> {
    if !template.signatures.contains(&combo.signature) {
        return Err(GenError::SignatureMismatch {
            template: template.id.to_string(),
            signature: combo.signature,
        });
    }
    if !template.supports(style) {
        return Err(GenError::StyleMismatch {
            template: template.id.to_string(),
            style,
        });
    }
    let mut inst = Inst { combo, style, rng };
    let (query, task) = (template.build)(&mut inst);
    let gold = canonicalize(&task);
    Ok(NlTaskPair {
        query,
        filter_count: gold.filter_count(),
        category: gold.category(),
        gold,
        referent_style: style,
        paraphrased: false,
        combo: combo.clone(),
        template: template.id.to_string(),
    })
}

/// One instance of every template and style the combo supports.
pub fn instantiate_templates(combo: &AttributeCombo, seed: u64) -> Vec<NlTaskPair> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for t in templates().iter().filter(|t| t.signatures.contains(&combo.signature)) {
        for style in ReferentStyle::ALL {
            if t.supports(style) {
                out.push(instantiate(t, combo, style, &mut rng).expect("compatible template"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::serialize_task;

    #[test]
    fn nice_numbers() {
        assert_eq!(nice(1234.5), "1200");
        assert_eq!(nice(0.01234), "0.012");
        assert_eq!(nice(-3.7), "-3.7");
        assert_eq!(nice(99.7), "100");
        assert_eq!(nice(0.3), "0.3");
    }

    #[test]
    fn template_ids_are_unique_and_categories_covered() {
        let mut ids: Vec<_> = templates().iter().map(|t| t.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), templates().len());
        for cat in TaskCategory::ALL {
            for sig in [CQ, CTQ, CQQ] {
                assert!(
                    templates()
                        .iter()
                        .any(|t| t.category == cat && t.signatures.contains(&sig)),
                    "{cat:?} {sig:?}"
                );
            }
        }
    }

    #[test]
    fn list_phrases() {
        let v: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(series_of(&v), "a, b, and c");
        assert_eq!(series_of(&v[..2]), "a and b");
    }

    #[test]
    fn gold_matches_rendered_example() {
        let combo = super::super::tests::fruit_combo();
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let p = instantiate(template("cmp").unwrap(), &combo, ReferentStyle::Mixed, &mut rng).unwrap();
        assert!(
            p.query.starts_with("What is the difference of price between "),
            "{}",
            p.query
        );
        assert!(p.query.contains("(the "));
        assert_eq!(p.filter_count, 2);
        assert!(serialize_task(&p.gold).contains("derive: difference("));
        let err = instantiate(template("trend").unwrap(), &combo, ReferentStyle::Name, &mut rng).unwrap_err();
        assert!(matches!(err, GenError::SignatureMismatch { .. }));
        let err = instantiate(template("agg-list").unwrap(), &combo, ReferentStyle::Channel, &mut rng).unwrap_err();
        assert!(matches!(err, GenError::StyleMismatch { .. }));
    }
}
