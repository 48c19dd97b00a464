use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

use super::lexicon::{
    at_word_boundary, count_value, find_word, ordinal_value, parse_number, plural, scan_times, superlative_fn,
    COLOR_WORDS,
};
use super::{Backend, QueryContext, Referent, Span, TranslateError, Translator, TranslatorReport};
use crate::chart::{AttrType, ChartSpec, ResolveOptions, Resolved, Resolver};
use crate::task::{
    serialize_task, validate, AggregateFn, AttributeRef, DeriveKind, DeriveSpec, Direction, Filter, FilterOp,
    FormatError, Literal, Task, TaskKind,
};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RulesOptions {
    /// Match attribute synonyms in addition to declared names.
    pub synonyms: bool,
}

impl Default for RulesOptions {
    fn default() -> Self {
        RulesOptions { synonyms: true }
    }
}

/// Deterministic keyword and pattern translator.
#[derive(Debug, Clone, Copy, Default)]
pub struct RulesTranslator {
    pub options: RulesOptions,
}

impl RulesTranslator {
    pub fn new(options: RulesOptions) -> Self {
        RulesTranslator { options }
    }

    /// Translator for evaluation runs: declared names only.
    pub fn strict() -> Self {
        RulesTranslator::new(RulesOptions { synonyms: false })
    }

    pub fn referents(&self, query: &str, ctx: &QueryContext) -> Result<Vec<Referent>, TranslateError> {
        let a = Analysis::new(query, ctx, self.options)?;
        Ok(a.found
            .iter()
            .map(|f| Referent {
                reference: f.reference.clone(),
                span: a.span(&f.range),
            })
            .collect())
    }

    pub fn filters(&self, query: &str, ctx: &QueryContext) -> Result<Vec<Filter>, TranslateError> {
        let a = Analysis::new(query, ctx, self.options)?;
        let mut out: Vec<Filter> = a
            .category_filters(&a.categorical())?
            .into_iter()
            .map(|(f, _)| f)
            .collect();
        out.extend(a.shared_filters()?.into_iter().map(|(f, _)| f));
        Ok(out)
    }

    pub fn derivation(&self, query: &str, ctx: &QueryContext) -> Result<Option<DeriveSpec>, TranslateError> {
        let a = Analysis::new(query, ctx, self.options)?;
        let kind = detect_operation(&a.masked).ok().map(|(k, _)| k);
        Ok(a.derivation(kind)?.map(|(d, _)| d))
    }
}

impl Translator for RulesTranslator {
    fn backend(&self) -> Backend {
        Backend::Rules
    }

    fn translate(&self, query: &str, ctx: &QueryContext) -> Result<TranslatorReport, TranslateError> {
        if query.trim().is_empty() {
            return Err(TranslateError::EmptyQuery);
        }
        let a = Analysis::new(query, ctx, self.options)?;
        let (task, ranges) = a.build()?;
        let raw = serialize_task(&task);
        let violations = validate(&task);
        if !violations.is_empty() {
            return Err(TranslateError::Format {
                raw,
                error: FormatError::Invalid(violations),
            });
        }
        a.resolver().normalize_task(&task)?;
        let spans = ranges.into_iter().map(|(path, r)| (path, a.span(&r))).collect();
        Ok(TranslatorReport {
            task,
            spans,
            backend: Backend::Rules,
            raw,
        })
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static pattern"))
}

const SUPERLATIVES: &str =
    "highest|largest|greatest|most|biggest|fastest|maximum|lowest|smallest|least|fewest|slowest|minimum";
const COUNTS: &str = r"\d+|one|two|three|four|five|six|seven|eight|nine|ten";
const ORDINALS: &str = r"first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth|\d+(?:st|nd|rd|th)";

fn threshold_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(
        &RE,
        r"\b(greater than|more than|higher than|larger than|bigger than|above|over|exceeding|less than|fewer than|lower than|smaller than|below|under)\s+(the average|the mean|-?\d+(?:,\d{3})*(?:\.\d+)?)\b",
    )
}

/// Classify a lowercase query whose referents may already be masked.
/// Returns the operation and the byte range of the phrase that decided it.
pub(crate) fn detect_operation(lower: &str) -> Result<(TaskKind, Range<usize>), TranslateError> {
    static AGG_LEAD: OnceLock<Regex> = OnceLock::new();
    static AGG: OnceLock<Regex> = OnceLock::new();
    static DIFF: OnceLock<Regex> = OnceLock::new();
    static TREND: OnceLock<Regex> = OnceLock::new();
    static SUM: OnceLock<Regex> = OnceLock::new();
    static IDENT: OnceLock<Regex> = OnceLock::new();
    static RANKED: OnceLock<Regex> = OnceLock::new();
    let masked = mask_thresholds(lower);
    let text = masked.as_str();
    let agg_lead = re(
        &AGG_LEAD,
        r"^\s*(?:what(?:'s| is| was| are)|find|compute|calculate|show|give me|tell me)\s+the\s+(average|mean|maximum|minimum|max|min)\b",
    );
    if let Some(c) = agg_lead.captures(text) {
        return Ok((TaskKind::Aggregate, c.get(1).expect("group").range()));
    }
    let rules: [(&Regex, TaskKind); 4] = [
        (re(&AGG, r"\b(?:average|mean)\b"), TaskKind::Aggregate),
        (re(&DIFF, r"\b(?:difference|gap|differ)\b"), TaskKind::Compare),
        (re(&TREND, r"\btrend\b"), TaskKind::Trend),
        (re(&SUM, r"\b(?:sum|combined|total)\b"), TaskKind::Sum),
    ];
    for (rx, kind) in rules {
        if let Some(m) = rx.find(text) {
            return Ok((kind, m.range()));
        }
    }
    let ident = re(
        &IDENT,
        r"^\s*(?:(?:in|on|at|during|for)\s+(?:what|which)|what|which|who|where|when|how|list|name|show|find|tell|give|among)\b",
    );
    if let Some(m) = ident.find(text) {
        return Ok((TaskKind::Identify, m.range()));
    }
    let ranked = re(&RANKED, &format!(r"\b(?:top|bottom|{SUPERLATIVES})\b"));
    if let Some(m) = ranked.find(text) {
        return Ok((TaskKind::Identify, m.range()));
    }
    Err(TranslateError::UnparseableQuery(format!(
        "no operation pattern matches `{}`",
        lower.trim()
    )))
}

fn mask_thresholds(lower: &str) -> String {
    let mut out = lower.to_string();
    for m in threshold_regex().find_iter(lower) {
        mask(&mut out, &m.range());
    }
    out
}

fn mask(text: &mut String, range: &Range<usize>) {
    // SAFETY of the byte replacement: every masked range starts and ends on
    // char boundaries, and '#' is a single byte.
    let mut bytes = std::mem::take(text).into_bytes();
    for b in &mut bytes[range.clone()] {
        *b = b'#';
    }
    *text = String::from_utf8(bytes).unwrap_or_default();
}

fn overlaps(a: &Range<usize>, b: &Range<usize>) -> bool {
    a.start < b.end && b.start < a.end
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Style {
    Name,
    Channel,
    Mixed,
}

#[derive(Debug, Clone)]
struct Found {
    range: Range<usize>,
    reference: AttributeRef,
    resolved: Resolved,
    style: Style,
}

#[derive(Debug, Clone)]
enum ThresholdValue {
    Number(f64),
    Average,
}

#[derive(Debug, Clone)]
struct Threshold {
    range: Range<usize>,
    op: FilterOp,
    value: ThresholdValue,
}

#[derive(Debug, Clone)]
enum Extreme {
    Aggregate(AggregateFn),
    Rank {
        op: FilterOp,
        count: u32,
        direction: Direction,
    },
}

#[derive(Debug, Clone)]
struct Superlative {
    range: Range<usize>,
    extreme: Extreme,
}

struct Analysis<'a> {
    query: &'a str,
    lower: String,
    masked: String,
    ctx: &'a QueryContext,
    options: RulesOptions,
    found: Vec<Found>,
    times: Vec<(Range<usize>, Timestamp)>,
    thresholds: Vec<Threshold>,
    superlatives: Vec<Superlative>,
    prior: Option<(Range<usize>, Option<DeriveKind>)>,
    growth: Option<Range<usize>>,
    ranking: Option<Range<usize>>,
}

type Ranged<T> = (T, Range<usize>);

impl<'a> Analysis<'a> {
    fn new(query: &'a str, ctx: &'a QueryContext, options: RulesOptions) -> Result<Self, TranslateError> {
        let lower = query.to_ascii_lowercase();
        let mut masked = lower.clone();
        let mut taken: Vec<Range<usize>> = Vec::new();

        let mut thresholds = Vec::new();
        for c in threshold_regex().captures_iter(&lower) {
            let whole = c.get(0).expect("match").range();
            let word = c.get(1).expect("group").as_str();
            let value = c.get(2).expect("group").as_str();
            let op = if [
                "less than",
                "fewer than",
                "lower than",
                "smaller than",
                "below",
                "under",
            ]
            .contains(&word)
            {
                FilterOp::Lt
            } else {
                FilterOp::Gt
            };
            let value = if value.starts_with("the") {
                ThresholdValue::Average
            } else {
                ThresholdValue::Number(
                    parse_number(value)
                        .ok_or_else(|| TranslateError::TypeMismatch(format!("`{value}` is not a number")))?,
                )
            };
            taken.push(whole.clone());
            thresholds.push(Threshold {
                range: whole,
                op,
                value,
            });
        }

        let day_first = !ctx.locale.to_ascii_lowercase().starts_with("en-us") && ctx.locale != "en";
        let times: Vec<_> = scan_times(query, day_first)
            .into_iter()
            .filter(|(r, _)| !taken.iter().any(|t| overlaps(t, r)))
            .collect();
        taken.extend(times.iter().map(|(r, _)| r.clone()));

        let mut a = Analysis {
            query,
            lower,
            masked: String::new(),
            ctx,
            options,
            found: Vec::new(),
            times,
            thresholds,
            superlatives: Vec::new(),
            prior: None,
            growth: None,
            ranking: None,
        };
        a.found = a.scan_referents(&taken)?;
        for r in taken.iter().chain(a.found.iter().map(|f| &f.range)) {
            mask(&mut masked, r);
        }
        a.masked = masked;
        a.scan_superlatives();
        a.scan_prior();
        static GROWTH: OnceLock<Regex> = OnceLock::new();
        a.growth = re(&GROWTH, r"\bgrowth\b").find(&a.masked).map(|m| m.range());
        static RANKING: OnceLock<Regex> = OnceLock::new();
        if a.prior.is_none() {
            a.ranking = re(&RANKING, r"\brank(?:s|ing|ings)?\b")
                .find(&a.masked)
                .map(|m| m.range());
        }
        Ok(a)
    }

    fn spec(&self) -> &ChartSpec {
        &self.ctx.spec
    }

    fn resolver(&self) -> Resolver<'_> {
        let r = match &self.ctx.prior_state {
            Some(st) => Resolver::for_state(st),
            None => Resolver::new(&self.ctx.spec),
        };
        r.with_options(ResolveOptions {
            synonyms: self.options.synonyms,
        })
    }

    fn span(&self, r: &Range<usize>) -> Span {
        let chars = |b: usize| self.query[..b].chars().count();
        Span {
            start: chars(r.start),
            end: chars(r.end),
        }
    }

    fn scan_referents(&self, taken: &[Range<usize>]) -> Result<Vec<Found>, TranslateError> {
        let spec = self.spec();
        let lower = &self.lower;
        let mut accepted: Vec<Found> = Vec::new();
        let free = |r: &Range<usize>, acc: &[Found]| {
            !taken.iter().any(|t| overlaps(t, r)) && !acc.iter().any(|f| overlaps(&f.range, r))
        };

        // channel phrases first: "the green line", "the green and blue lines"
        let mut channel_found = Vec::new();
        for start in find_word(lower, "the") {
            if let Some((whole, items)) = self.channel_phrase(start.start) {
                if !taken.iter().any(|t| overlaps(t, &whole)) {
                    channel_found.push((whole, items));
                }
            }
        }
        for (whole, items) in channel_found {
            if accepted.iter().any(|f| overlaps(&f.range, &whole)) {
                continue;
            }
            let single = items.len() == 1;
            for (vr, binding) in items {
                let reference = AttributeRef::channel(binding.0, binding.1.clone());
                let resolved = self.resolver().resolve(&reference)?;
                accepted.push(Found {
                    range: if single { whole.clone() } else { vr },
                    reference,
                    resolved,
                    style: Style::Channel,
                });
            }
        }

        static MARK_PHRASE: OnceLock<Regex> = OnceLock::new();
        let phrase = re(
            &MARK_PHRASE,
            r"\bthe\s+([a-z]+)\s+(?:line|bar|area|series|slice|point|dot|marker)s?\b",
        );
        for c in phrase.captures_iter(lower) {
            let whole = c.get(0).expect("match").range();
            let color = c.get(1).expect("group").range();
            if COLOR_WORDS.contains(&&lower[color.clone()])
                && !taken.iter().any(|t| overlaps(t, &whole))
                && !accepted.iter().any(|f| overlaps(&f.range, &color))
            {
                return Err(TranslateError::UnresolvableReference(self.query[whole].to_string()));
            }
        }

        // names, plurals, synonyms and categorical choices, longest first
        let mut candidates: Vec<(String, u8, Resolved, String)> = Vec::new();
        for (i, attr) in spec.attributes.iter().enumerate() {
            let mut push = |surface: String, tier: u8| {
                candidates.push((
                    surface.to_ascii_lowercase(),
                    tier,
                    Resolved::Attribute(i),
                    attr.name.clone(),
                ))
            };
            push(attr.name.clone(), 0);
            push(plural(&attr.name), 0);
            if self.options.synonyms {
                for s in &attr.synonyms {
                    push(s.clone(), 1);
                    push(plural(s), 1);
                }
            }
            if attr.kind == AttrType::Categorical {
                for c in &attr.choices {
                    candidates.push((
                        c.to_ascii_lowercase(),
                        2,
                        Resolved::Choice {
                            attribute: i,
                            choice: c.clone(),
                        },
                        c.clone(),
                    ));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
        candidates.dedup_by(|a, b| a.0 == b.0 && a.2 == b.2);

        let mut i = 0;
        while i < candidates.len() {
            let surface = candidates[i].0.clone();
            let group_end = candidates[i..]
                .iter()
                .position(|c| c.0 != surface)
                .map_or(candidates.len(), |p| i + p);
            let group = &candidates[i..group_end];
            i = group_end;
            let best = group.iter().map(|c| c.1).min().expect("nonempty group");
            let best: Vec<_> = group.iter().filter(|c| c.1 == best).collect();
            for range in find_word(lower, &surface) {
                if !free(&range, &accepted) {
                    continue;
                }
                if best.len() > 1 {
                    return Err(TranslateError::AmbiguousReference {
                        reference: self.query[range].to_string(),
                        candidates: best.iter().map(|c| c.3.clone()).collect(),
                    });
                }
                let (_, _, resolved, canonical) = best[0].clone();
                accepted.push(Found {
                    range,
                    reference: AttributeRef::name(canonical),
                    resolved,
                    style: Style::Name,
                });
            }
        }
        accepted.sort_by_key(|f| f.range.start);

        // "Germany (the green line)" folds into one mixed referent
        let mut out: Vec<Found> = Vec::new();
        let mut k = 0;
        while k < accepted.len() {
            let cur = &accepted[k];
            if let (Style::Name, Resolved::Choice { choice, .. }, Some(next)) =
                (cur.style, &cur.resolved, accepted.get(k + 1))
            {
                let gap = &lower[cur.range.end..next.range.start.min(lower.len())];
                let closes = lower[next.range.end..].starts_with(')');
                if next.style == Style::Channel && gap.trim() == "(" && closes {
                    if let Some((channel, value)) = next.reference.channel_part() {
                        let reference = AttributeRef::mixed(choice.clone(), channel, value);
                        let resolved = self.resolver().resolve(&reference)?;
                        out.push(Found {
                            range: cur.range.start..next.range.end + 1,
                            reference,
                            resolved,
                            style: Style::Mixed,
                        });
                        k += 2;
                        continue;
                    }
                }
            }
            out.push(cur.clone());
            k += 1;
        }
        Ok(out)
    }

    /// Parse "the <value>[, <value>]* [and <value>] <noun>[s]" at `start`.
    #[allow(clippy::type_complexity)]
    fn channel_phrase(
        &self,
        start: usize,
    ) -> Option<(Range<usize>, Vec<(Range<usize>, (crate::task::Channel, String))>)> {
        const NOUNS: [&str; 8] = ["line", "bar", "area", "series", "slice", "point", "dot", "marker"];
        let lower = &self.lower;
        let bindings = &self.spec().channel_bindings;
        let mut pos = start + "the ".len();
        if !lower[start..].starts_with("the ") {
            return None;
        }
        let mut items = Vec::new();
        loop {
            let hit = bindings
                .iter()
                .filter(|b| {
                    let v = b.value.to_ascii_lowercase();
                    lower[pos..].starts_with(&v) && at_word_boundary(lower, &(pos..pos + v.len()))
                })
                .max_by_key(|b| b.value.len())?;
            let end = pos + hit.value.len();
            items.push((pos..end, (hit.channel, hit.value.clone())));
            pos = end;
            let rest = &lower[pos..];
            if let Some(skip) = [", and ", " and ", ", "].iter().find(|s| rest.starts_with(**s)) {
                pos += skip.len();
                continue;
            }
            let rest = rest.strip_prefix(' ')?;
            for noun in NOUNS {
                for form in [format!("{noun}s"), noun.to_string()] {
                    if rest.starts_with(&form) && at_word_boundary(lower, &(pos + 1..pos + 1 + form.len())) {
                        return Some((start..pos + 1 + form.len(), items));
                    }
                }
            }
            return None;
        }
    }

    fn scan_superlatives(&mut self) {
        static TOPK: OnceLock<Regex> = OnceLock::new();
        static ORD: OnceLock<Regex> = OnceLock::new();
        static COUNTED: OnceLock<Regex> = OnceLock::new();
        static PLAIN: OnceLock<Regex> = OnceLock::new();
        let mut text = self.masked.clone();
        let mut out = Vec::new();

        let topk = re(&TOPK, &format!(r"\b(top|bottom)[\s-]+({COUNTS})\b"));
        for c in topk.captures_iter(&self.masked) {
            let count = count_value(&c[2]).unwrap_or(1);
            let direction = if &c[1] == "top" {
                Direction::Top
            } else {
                Direction::Bottom
            };
            out.push(Superlative {
                range: c.get(0).expect("match").range(),
                extreme: Extreme::Rank {
                    op: FilterOp::Lt,
                    count,
                    direction,
                },
            });
        }
        for s in &out {
            mask(&mut text, &s.range);
        }
        let ord = re(&ORD, &format!(r"\b({ORDINALS})\s+({SUPERLATIVES})\b"));
        let found: Vec<_> = ord
            .captures_iter(&text)
            .filter_map(|c| {
                let n = ordinal_value(&c[1])?;
                let f = superlative_fn(&c[2])?;
                Some(Superlative {
                    range: c.get(0).expect("match").range(),
                    extreme: Extreme::Rank {
                        op: FilterOp::Eq,
                        count: n,
                        direction: if f == AggregateFn::Max {
                            Direction::Top
                        } else {
                            Direction::Bottom
                        },
                    },
                })
            })
            .collect();
        for s in found {
            mask(&mut text, &s.range);
            out.push(s);
        }
        let counted = re(&COUNTED, &format!(r"\b({SUPERLATIVES})\s+({COUNTS})\b"));
        let found: Vec<_> = counted
            .captures_iter(&text)
            .filter_map(|c| {
                let f = superlative_fn(&c[1])?;
                let n = count_value(&c[2])?;
                Some(Superlative {
                    range: c.get(0).expect("match").range(),
                    extreme: Extreme::Rank {
                        op: FilterOp::Lt,
                        count: n,
                        direction: if f == AggregateFn::Max {
                            Direction::Top
                        } else {
                            Direction::Bottom
                        },
                    },
                })
            })
            .collect();
        for s in found {
            mask(&mut text, &s.range);
            out.push(s);
        }
        let plain = re(&PLAIN, &format!(r"\b({SUPERLATIVES})\b"));
        for c in plain.captures_iter(&text) {
            if let Some(f) = superlative_fn(&c[1]) {
                out.push(Superlative {
                    range: c.get(0).expect("match").range(),
                    extreme: Extreme::Aggregate(f),
                });
            }
        }
        out.sort_by_key(|s| s.range.start);
        self.superlatives = out;
    }

    fn scan_prior(&mut self) {
        static PRIOR: OnceLock<Regex> = OnceLock::new();
        let rx = re(
            &PRIOR,
            r"\b(?:that|this|the previous|the derived)\s+(sum|difference|trend|rank|ranking|growth|series|result)\b",
        );
        self.prior = rx.captures(&self.masked).map(|c| {
            let kind = match &c[1] {
                "sum" => Some(DeriveKind::Sum),
                "difference" => Some(DeriveKind::Difference),
                "trend" => Some(DeriveKind::Trend),
                "rank" | "ranking" => Some(DeriveKind::Rank),
                "growth" => Some(DeriveKind::Growth),
                _ => None,
            };
            (c.get(0).expect("match").range(), kind)
        });
    }

    fn attr_kind(&self, f: &Found) -> Option<AttrType> {
        match f.resolved {
            Resolved::Attribute(i) => Some(self.spec().attributes[i].kind),
            Resolved::Choice { .. } => None,
        }
    }

    fn attributes(&self) -> Vec<&Found> {
        self.found.iter().filter(|f| self.attr_kind(f).is_some()).collect()
    }

    fn quantitative(&self) -> Vec<&Found> {
        self.found
            .iter()
            .filter(|f| self.attr_kind(f) == Some(AttrType::Quantitative))
            .collect()
    }

    fn categorical(&self) -> Vec<&Found> {
        self.found
            .iter()
            .filter(|f| matches!(f.resolved, Resolved::Choice { .. }))
            .collect()
    }

    fn y_ref(&self) -> AttributeRef {
        AttributeRef::name(self.spec().encodings.y.clone())
    }

    /// The quantitative attribute a phrase at `range` talks about: the
    /// nearest one after it, else the nearest one before, else the y axis.
    fn measure_near(&self, range: &Range<usize>, prefer_before: bool) -> AttributeRef {
        let q = self.quantitative();
        let after = q.iter().find(|f| f.range.start >= range.end);
        let before = q.iter().rev().find(|f| f.range.end <= range.start);
        let pick = if prefer_before {
            before.or(after)
        } else {
            after.or(before)
        };
        pick.map(|f| f.reference.clone()).unwrap_or_else(|| self.y_ref())
    }

    fn prior_series(&self) -> Result<Option<Ranged<crate::chart::DerivedSeries>>, TranslateError> {
        let Some((range, kind)) = &self.prior else {
            return Ok(None);
        };
        let phrase = self.query[range.clone()].to_string();
        let state = self
            .ctx
            .prior_state
            .as_ref()
            .ok_or_else(|| TranslateError::UnresolvableReference(phrase.clone()))?;
        state
            .view
            .derived_series
            .iter()
            .rev()
            .find(|d| kind.is_none_or(|k| d.provenance.kind == k))
            .map(|d| Some((d.clone(), range.clone())))
            .ok_or(TranslateError::UnresolvableReference(phrase))
    }

    fn operand_ref(&self, f: &Found) -> AttributeRef {
        match (&f.style, &f.resolved) {
            (Style::Name, Resolved::Choice { choice, .. }) => AttributeRef::name(choice.clone()),
            _ => f.reference.clone(),
        }
    }

    fn category_filters(&self, cats: &[&Found]) -> Result<Vec<Ranged<Filter>>, TranslateError> {
        let mut groups: Vec<(usize, Vec<&Found>)> = Vec::new();
        for f in cats {
            let Resolved::Choice { attribute, .. } = f.resolved else {
                continue;
            };
            match groups.iter_mut().find(|(a, _)| *a == attribute) {
                Some((_, g)) => g.push(f),
                None => groups.push((attribute, vec![f])),
            }
        }
        let mut out = Vec::new();
        for (attribute, members) in groups {
            let attr_name = self.spec().attributes[attribute].name.clone();
            let choice_of = |f: &Found| match &f.resolved {
                Resolved::Choice { choice, .. } => choice.clone(),
                Resolved::Attribute(_) => unreachable!("grouped choices only"),
            };
            if let [one] = members.as_slice() {
                let filter = match one.style {
                    Style::Name => Filter::eq(AttributeRef::name(attr_name), choice_of(one)),
                    Style::Channel => {
                        let (_, value) = one.reference.channel_part().expect("channel referent");
                        Filter::eq(one.reference.clone(), value)
                    }
                    Style::Mixed => Filter::eq(one.reference.clone(), choice_of(one)),
                };
                out.push((filter, one.range.clone()));
            } else {
                let mut choices: Vec<String> = Vec::new();
                for m in &members {
                    let c = choice_of(m);
                    if !choices.contains(&c) {
                        choices.push(c);
                    }
                }
                let range = members[0].range.start..members[members.len() - 1].range.end;
                out.push((Filter::list(AttributeRef::name(attr_name), choices), range));
            }
        }
        Ok(out)
    }

    fn time_filters(&self) -> Result<Vec<Ranged<Filter>>, TranslateError> {
        if self.times.is_empty() {
            return Ok(Vec::new());
        }
        let spec = self.spec();
        let t_attr = match spec.temporal_index() {
            Some(i) => AttributeRef::name(spec.attributes[i].name.clone()),
            None => {
                let (r, _) = &self.times[0];
                return Err(TranslateError::UnresolvableReference(self.query[r.clone()].to_string()));
            }
        };
        let lower = &self.lower;
        let word_before = |at: usize| -> Option<(String, usize)> {
            let head = lower[..at].trim_end();
            let start = head.rfind(|c: char| !c.is_ascii_alphabetic()).map_or(0, |i| i + 1);
            let w = &head[start..];
            (!w.is_empty()).then(|| (w.to_string(), start))
        };
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.times.len() {
            let (r, ts) = &self.times[i];
            let prev = word_before(r.start);
            if let Some((r2, ts2)) = self.times.get(i + 1) {
                let between = lower[r.end..r2.start].trim();
                let opener = prev.as_ref().filter(|(w, _)| w == "from" || w == "between");
                if ["to", "and", "-", "through", "until", "till"].contains(&between)
                    && (opener.is_some() || between == "-")
                {
                    if ts.chrono_cmp(ts2) == std::cmp::Ordering::Greater {
                        return Err(TranslateError::TypeMismatch(format!(
                            "time range {ts} to {ts2} is reversed"
                        )));
                    }
                    let start = opener.map_or(r.start, |(_, s)| *s);
                    out.push((
                        Filter::range(t_attr.clone(), ts.to_string(), ts2.to_string()),
                        start..r2.end,
                    ));
                    i += 2;
                    continue;
                }
            }
            let (op, start) = match prev {
                Some((w, s)) if w == "after" || w == "since" => (FilterOp::Gt, s),
                Some((w, s)) if w == "before" || w == "until" => (FilterOp::Lt, s),
                Some((w, s)) if ["in", "on", "during", "at", "for", "of"].contains(&w.as_str()) => (FilterOp::Eq, s),
                _ => (FilterOp::Eq, r.start),
            };
            out.push((
                Filter {
                    attr: t_attr.clone(),
                    op,
                    value: crate::task::FilterValue::Literal(Literal::time(*ts)),
                    direction: None,
                },
                start..r.end,
            ));
            i += 1;
        }
        Ok(out)
    }

    fn threshold_filters(&self) -> Vec<Ranged<Filter>> {
        self.thresholds
            .iter()
            .map(|t| {
                let attr = self.measure_near(&t.range, true);
                let filter = match t.value {
                    ThresholdValue::Number(n) => Filter {
                        attr,
                        op: t.op,
                        value: crate::task::FilterValue::Literal(Literal::number(n)),
                        direction: None,
                    },
                    ThresholdValue::Average => Filter::aggregate(attr.clone(), t.op, AggregateFn::Avg, attr),
                };
                (filter, t.range.clone())
            })
            .collect()
    }

    fn superlative_filters(&self) -> Vec<Ranged<Filter>> {
        self.superlatives
            .iter()
            .map(|s| {
                let attr = self.measure_near(&s.range, false);
                let filter = match s.extreme {
                    Extreme::Aggregate(f) => Filter::aggregate(attr.clone(), FilterOp::Eq, f, attr),
                    Extreme::Rank { op, count, direction } => Filter::rank(attr, op, count, direction),
                };
                (filter, s.range.clone())
            })
            .collect()
    }

    /// Filters that apply to every subtask: time, thresholds, superlatives.
    fn shared_filters(&self) -> Result<Vec<Ranged<Filter>>, TranslateError> {
        let mut out = self.time_filters()?;
        out.extend(self.threshold_filters());
        out.extend(self.superlative_filters());
        Ok(out)
    }

    fn derivation(&self, kind: Option<TaskKind>) -> Result<Option<Ranged<DeriveSpec>>, TranslateError> {
        let op = detect_operation(&self.masked).ok();
        let op_range = op.as_ref().map(|(_, r)| r.clone()).unwrap_or(0..0);
        let kind = kind.or(op.map(|(k, _)| k));
        let cats = self.categorical();
        match kind {
            Some(TaskKind::Compare) => {
                let operands = self.operands(&cats, "comparison")?;
                return Ok(Some((DeriveSpec::new(DeriveKind::Difference, operands), op_range)));
            }
            Some(TaskKind::Sum) => {
                let q = self.quantitative();
                let operands = if q.len() >= 2 {
                    q.iter().map(|f| f.reference.clone()).collect()
                } else {
                    self.operands(&cats, "sum")?
                };
                return Ok(Some((DeriveSpec::new(DeriveKind::Sum, operands), op_range)));
            }
            Some(TaskKind::Trend) => {
                let target = self.measure_near(&op_range, false);
                return Ok(Some((DeriveSpec::new(DeriveKind::Trend, vec![target]), op_range)));
            }
            _ => {}
        }
        if let Some(s) = self
            .superlatives
            .iter()
            .find(|s| matches!(s.extreme, Extreme::Rank { .. }))
        {
            let Extreme::Rank { direction, .. } = s.extreme else {
                unreachable!()
            };
            let attr = self.measure_near(&s.range, false);
            return Ok(Some((
                DeriveSpec::new(DeriveKind::Rank, vec![attr]).with_direction(direction),
                s.range.clone(),
            )));
        }
        if let Some(r) = &self.growth {
            let attr = self.measure_near(r, false);
            return Ok(Some((DeriveSpec::new(DeriveKind::Growth, vec![attr]), r.clone())));
        }
        if let Some((series, range)) = self.prior_series()? {
            return Ok(Some((series.provenance, range)));
        }
        if let Some(r) = &self.ranking {
            let attr = self.measure_near(r, false);
            return Ok(Some((
                DeriveSpec::new(DeriveKind::Rank, vec![attr]).with_direction(Direction::Top),
                r.clone(),
            )));
        }
        Ok(None)
    }

    fn operands(&self, cats: &[&Found], what: &str) -> Result<Vec<AttributeRef>, TranslateError> {
        if cats.len() != 2 {
            return Err(TranslateError::UnparseableQuery(format!(
                "a {what} needs exactly two referents, found {}",
                cats.len()
            )));
        }
        Ok(cats.iter().map(|f| self.operand_ref(f)).collect())
    }

    fn build(&self) -> Result<(Task, BTreeMap<String, Range<usize>>), TranslateError> {
        let (kind, op_range) = detect_operation(&self.masked)?;
        let mut spans: BTreeMap<String, Range<usize>> = BTreeMap::new();
        let quant = self.quantitative();
        let cats = self.categorical();
        let prior = self.prior_series()?;

        if kind == TaskKind::Identify
            && self.found.is_empty()
            && self.times.is_empty()
            && self.superlatives.is_empty()
            && self.thresholds.is_empty()
        {
            return Err(TranslateError::UnparseableQuery(format!(
                "no attribute, value or time found in `{}`",
                self.query.trim()
            )));
        }

        let measure_target = || -> Ranged<AttributeRef> {
            if let Some(f) = quant.first() {
                (f.reference.clone(), f.range.clone())
            } else if let Some((series, r)) = &prior {
                (AttributeRef::name(series.measure.clone()), r.clone())
            } else {
                (self.y_ref(), op_range.clone())
            }
        };
        let mut task = Task::new(kind);
        let (target, target_range) = match kind {
            TaskKind::Identify => match self.attributes().first() {
                Some(f) => (f.reference.clone(), f.range.clone()),
                None => (self.y_ref(), op_range.clone()),
            },
            _ => measure_target(),
        };
        if kind == TaskKind::Aggregate {
            let word = &self.lower[op_range.clone()];
            let f = match word {
                "maximum" | "max" => AggregateFn::Max,
                "minimum" | "min" => AggregateFn::Min,
                _ => AggregateFn::Avg,
            };
            task = task.with_aggregate_target(f, target.clone());
        } else {
            task = task.with_target(target.clone());
        }
        spans.insert("target".into(), target_range.clone());

        let mut shared = self.shared_filters()?;
        if kind == TaskKind::Aggregate {
            shared.retain(|(_, r)| !overlaps(r, &op_range));
        }
        let derive = self.derivation(Some(kind))?;

        match kind {
            TaskKind::Compare => {
                let operands: Vec<&Found> = cats.clone();
                for (j, op) in operands.iter().enumerate() {
                    let mut sub = Task::identify(target.clone());
                    let (f, r) = self.category_filters(&[op])?.remove(0);
                    sub.filters.push(f);
                    spans.insert(format!("subtasks[{j}].filters[0]"), r);
                    for (f, r) in &shared {
                        spans.insert(format!("subtasks[{j}].filters[{}]", sub.filters.len()), r.clone());
                        sub.filters.push(f.clone());
                    }
                    spans.insert(format!("subtasks[{j}].target"), target_range.clone());
                    task.subtasks.push(sub);
                }
            }
            _ => {
                let filter_cats: Vec<&Found> = if kind == TaskKind::Sum && quant.len() < 2 {
                    Vec::new()
                } else {
                    cats
                };
                let mut filters = self.category_filters(&filter_cats)?;
                filters.extend(shared);
                for (j, (f, r)) in filters.into_iter().enumerate() {
                    spans.insert(format!("filters[{j}]"), r);
                    task.filters.push(f);
                }
            }
        }
        if let Some((d, r)) = derive {
            spans.insert("derive".into(), r);
            task.derive = Some(d);
        }
        Ok((task, spans))
    }
}
