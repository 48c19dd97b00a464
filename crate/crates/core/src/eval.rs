//! Scoring of translated tasks against gold tasks.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chart::ChartSpec;
use crate::dataset::{NlTaskPair, ReferentStyle};
use crate::task::{
    canonicalize, literally_equal, parse_task_text, semantically_equal, serialize_task, Task, TaskCategory,
};
use crate::translate::{QueryContext, Translator};

/// What counts as the right task operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMatch {
    /// The task kind must match exactly.
    #[default]
    Kind,
    /// Kinds of the same reporting category count as equal.
    Category,
}

/// Denominator of filter accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterDenominator {
    /// The larger of the predicted and gold filter counts, so spurious
    /// filters are penalised.
    #[default]
    Max,
    Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalOptions {
    pub task_match: TaskMatch,
    pub filter_denominator: FilterDenominator,
}

pub fn score_format(raw: &str) -> bool {
    parse_task_text(raw).is_ok()
}

pub fn score_literal(predicted: &Task, gold: &Task) -> bool {
    literally_equal(predicted, gold)
}

/// Literal equality after channel references are resolved against `spec`.
/// A prediction that does not resolve is wrong.
pub fn score_semantic(predicted: &Task, gold: &Task, spec: &ChartSpec) -> bool {
    semantically_equal(predicted, gold, spec).unwrap_or(false)
}

pub fn score_task(predicted: &Task, gold: &Task, mode: TaskMatch) -> bool {
    match mode {
        TaskMatch::Kind => predicted.kind == gold.kind,
        TaskMatch::Category => predicted.category() == gold.category(),
    }
}

/// Fraction of filters matched one to one between the two task trees.
/// Two filterless tasks score 1.
pub fn score_filter(predicted: &Task, gold: &Task, denominator: FilterDenominator) -> f64 {
    let key = |t: &Task| -> Vec<String> {
        canonicalize(t)
            .all_filters()
            .into_iter()
            .map(|f| serialize_task(&Task::new(t.kind).with_filter(f.clone())))
            .collect()
    };
    let (p, g) = (key(predicted), key(gold));
    let denom = match denominator {
        FilterDenominator::Max => p.len().max(g.len()),
        FilterDenominator::Gold => g.len(),
    };
    if denom == 0 {
        return if p.is_empty() { 1.0 } else { 0.0 };
    }
    let mut pool: HashMap<&str, usize> = HashMap::new();
    for k in &p {
        *pool.entry(k.as_str()).or_default() += 1;
    }
    let mut matched = 0;
    for k in &g {
        if let Some(n) = pool.get_mut(k.as_str()).filter(|n| **n > 0) {
            *n -= 1;
            matched += 1;
        }
    }
    matched as f64 / denom as f64
}

/// What a translator produced for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Prediction {
    /// Raw task text, when the backend produced any.
    pub raw: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalRecord {
    pub query: String,
    pub gold: String,
    pub predicted: Option<String>,
    pub error: Option<String>,
    pub category: TaskCategory,
    pub referent_style: ReferentStyle,
    pub format: bool,
    pub literal: bool,
    pub semantic: bool,
    pub task: bool,
    pub filter: f64,
}

type Metric = fn(&Scores) -> f64;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub n: usize,
    pub format: f64,
    pub literal: f64,
    pub semantic: f64,
    pub task: f64,
    pub filter: f64,
}

impl Scores {
    fn of<'a>(records: impl Iterator<Item = &'a EvalRecord>) -> Scores {
        let mut s = Scores::default();
        for r in records {
            s.n += 1;
            s.format += r.format as u8 as f64;
            s.literal += r.literal as u8 as f64;
            s.semantic += r.semantic as u8 as f64;
            s.task += r.task as u8 as f64;
            s.filter += r.filter;
        }
        if s.n > 0 {
            let n = s.n as f64;
            s.format /= n;
            s.literal /= n;
            s.semantic /= n;
            s.task /= n;
            s.filter /= n;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub backend: String,
    pub options: EvalOptions,
    pub overall: Scores,
    pub by_category: BTreeMap<TaskCategory, Scores>,
    pub by_referent_style: BTreeMap<ReferentStyle, Scores>,
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("Backend: {}\n\n", self.backend);
        let mut cols: Vec<(&str, &Scores)> = self.by_category.iter().map(|(c, s)| (c.as_str(), s)).collect();
        cols.push(("overall", &self.overall));
        let _ = write!(out, "| metric |");
        for (name, s) in &cols {
            let _ = write!(out, " {name} (n={}) |", s.n);
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(cols.len()));
        out.push('\n');
        let rows: [(&str, Metric); 5] = [
            ("format accuracy", |s| s.format),
            ("literal accuracy", |s| s.literal),
            ("semantic accuracy", |s| s.semantic),
            ("task accuracy", |s| s.task),
            ("filter accuracy", |s| s.filter),
        ];
        for (label, get) in rows {
            let _ = write!(out, "| {label} |");
            for (_, s) in &cols {
                let _ = write!(out, " {:.2}% |", get(s) * 100.0);
            }
            out.push('\n');
        }
        out.push_str("\n| referent style | n | literal | semantic | filter |\n|---|---:|---:|---:|---:|\n");
        for (style, s) in &self.by_referent_style {
            let _ = writeln!(
                out,
                "| {} | {} | {:.2}% | {:.2}% | {:.2}% |",
                style.as_str(),
                s.n,
                s.literal * 100.0,
                s.semantic * 100.0,
                s.filter * 100.0
            );
        }
        out
    }
}

fn spec_cache() -> impl FnMut(&NlTaskPair) -> Arc<ChartSpec> {
    let mut cache: HashMap<String, Arc<ChartSpec>> = HashMap::new();
    move |p| {
        cache
            .entry(p.combo.id.clone())
            .or_insert_with(|| Arc::new(p.combo.chart_spec()))
            .clone()
    }
}

/// Score predictions made elsewhere, one per pair.
pub fn score_predictions(
    pairs: &[NlTaskPair],
    predictions: &[Prediction],
    backend: &str,
    options: EvalOptions,
) -> EvalReport {
    assert_eq!(pairs.len(), predictions.len(), "one prediction per pair");
    let mut spec_of = spec_cache();
    let records = pairs
        .iter()
        .zip(predictions)
        .map(|(pair, pred)| score_one(pair, pred, &spec_of(pair), options))
        .collect();
    report(backend, options, records)
}

fn score_one(pair: &NlTaskPair, pred: &Prediction, spec: &ChartSpec, options: EvalOptions) -> EvalRecord {
    let parsed = pred.raw.as_deref().map(parse_task_text);
    let task = match &parsed {
        Some(Ok(t)) => Some(t),
        _ => None,
    };
    let error = pred.error.clone().or_else(|| match &parsed {
        Some(Err(e)) => Some(e.to_string()),
        _ => None,
    });
    EvalRecord {
        query: pair.query.clone(),
        gold: serialize_task(&pair.gold),
        predicted: pred.raw.clone(),
        error,
        category: pair.category,
        referent_style: pair.referent_style,
        format: task.is_some(),
        literal: task.is_some_and(|t| score_literal(t, &pair.gold)),
        semantic: task.is_some_and(|t| score_semantic(t, &pair.gold, spec)),
        task: task.is_some_and(|t| score_task(t, &pair.gold, options.task_match)),
        filter: task.map_or(0.0, |t| score_filter(t, &pair.gold, options.filter_denominator)),
    }
}

fn report(backend: &str, options: EvalOptions, records: Vec<EvalRecord>) -> EvalReport {
    let by_category = TaskCategory::ALL
        .iter()
        .map(|c| (*c, Scores::of(records.iter().filter(|r| r.category == *c))))
        .collect();
    let by_referent_style = ReferentStyle::ALL
        .iter()
        .map(|s| (*s, Scores::of(records.iter().filter(|r| r.referent_style == *s))))
        .collect();
    EvalReport {
        backend: backend.to_string(),
        options,
        overall: Scores::of(records.iter()),
        by_category,
        by_referent_style,
        records,
    }
}

/// Translate every query with `translator` and score the results.
pub fn evaluate(pairs: &[NlTaskPair], translator: &dyn Translator, options: EvalOptions) -> EvalReport {
    let mut spec_of = spec_cache();
    let records = pairs
        .iter()
        .map(|pair| {
            let spec = spec_of(pair);
            let ctx = QueryContext::new(spec.clone());
            let pred = match translator.translate(&pair.query, &ctx) {
                Ok(rep) => Prediction {
                    raw: Some(rep.raw),
                    error: None,
                },
                Err(e) => Prediction {
                    raw: e.raw().map(str::to_string),
                    error: Some(e.to_string()),
                },
            };
            score_one(pair, &pred, &spec, options)
        })
        .collect();
    let backend = match translator.backend() {
        crate::translate::Backend::Rules => "rules",
        crate::translate::Backend::Remote => "remote",
    };
    report(backend, options, records)
}
