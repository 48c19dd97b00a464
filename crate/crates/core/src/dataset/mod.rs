//! Synthetic NL query and task pairs over topic vocabularies.
//!
//! Attribute combinations are drawn from per-domain vocabularies, each
//! combination is given a synthetic chart, and question templates are filled
//! in to produce a query together with its gold [`Task`].

mod paraphrase;
mod templates;
mod vocab;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart::{AttrType, Attribute};
use crate::task::{literally_equal, parse_task_text, serialize_task, Task, TaskCategory};

pub use paraphrase::{paraphrase_prompt, Paraphraser};
pub use templates::{instantiate, instantiate_templates, template, templates, Template};
pub use vocab::{gen_combos, AttributeCombo, DomainVocab, Vocabulary, PALETTE};

/// Attribute-type signature of a combo: categorical (C), temporal (T) and
/// quantitative (Q) attributes in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Signature {
    CQ,
    CTQ,
    CQQ,
}

impl Signature {
    pub const ALL: [Signature; 3] = [Signature::CQ, Signature::CTQ, Signature::CQQ];

    pub fn of(attrs: &[Attribute]) -> Option<Self> {
        let kinds: Vec<AttrType> = attrs.iter().map(|a| a.kind).collect();
        use AttrType::*;
        match kinds.as_slice() {
            [Categorical, Quantitative] => Some(Signature::CQ),
            [Categorical, Temporal, Quantitative] => Some(Signature::CTQ),
            [Categorical, Quantitative, Quantitative] => Some(Signature::CQQ),
            _ => None,
        }
    }
}

/// How a query names categorical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferentStyle {
    /// "India"
    Name,
    /// "the orange line"
    Channel,
    /// "India (the orange line)"
    Mixed,
}

impl ReferentStyle {
    pub const ALL: [ReferentStyle; 3] = [ReferentStyle::Name, ReferentStyle::Channel, ReferentStyle::Mixed];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReferentStyle::Name => "name",
            ReferentStyle::Channel => "channel",
            ReferentStyle::Mixed => "mixed",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("vocabulary missing: {0}")]
    VocabMissing(String),
    #[error("invalid vocabulary `{domain}`: {message}")]
    InvalidVocab { domain: String, message: String },
    #[error("template `{template}` does not fit a {signature:?} combo")]
    SignatureMismatch { template: String, signature: Signature },
    #[error("template `{template}` does not support {style:?} referents")]
    StyleMismatch { template: String, style: ReferentStyle },
    #[error("no template for {category:?} with {style:?} referents fits the vocabulary")]
    NoTemplate {
        category: TaskCategory,
        style: ReferentStyle,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GenConfig {
    pub total_pairs: usize,
    pub category_weights: BTreeMap<TaskCategory, f64>,
    pub referent_weights: BTreeMap<ReferentStyle, f64>,
    pub seed: u64,
    pub paraphrase: bool,
    /// Paraphrases requested per template pair when paraphrasing.
    pub paraphrases_per_pair: usize,
    /// Number of attribute combinations to draw.
    pub combos: usize,
    /// Overrides of the built-in template weights, by template id.
    pub template_weights: BTreeMap<String, f64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            total_pairs: 5867,
            category_weights: BTreeMap::from([
                (TaskCategory::Identification, 0.5660),
                (TaskCategory::Comparison, 0.1406),
                (TaskCategory::Aggregation, 0.1411),
                (TaskCategory::Derivation, 0.1522),
            ]),
            referent_weights: BTreeMap::from([
                (ReferentStyle::Name, 0.8665),
                (ReferentStyle::Channel, 0.0932),
                (ReferentStyle::Mixed, 0.0402),
            ]),
            seed: 20_240_601,
            paraphrase: false,
            paraphrases_per_pair: 2,
            combos: 486,
            template_weights: BTreeMap::new(),
        }
    }
}

impl GenConfig {
    pub fn from_json_str(text: &str) -> Result<Self, GenError> {
        let c: GenConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        fn check<K: std::fmt::Debug>(what: &str, w: &BTreeMap<K, f64>) -> Result<(), GenError> {
            if w.values().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(GenError::Config(format!("{what} must be nonnegative")));
            }
            let sum: f64 = w.values().sum();
            if (sum - 1.0).abs() > 1e-3 {
                return Err(GenError::Config(format!("{what} sum to {sum}, not 1")));
            }
            Ok(())
        }
        check("category weights", &self.category_weights)?;
        check("referent weights", &self.referent_weights)?;
        if self.total_pairs == 0 || self.combos == 0 {
            return Err(GenError::Config("totalPairs and combos must be positive".into()));
        }
        for (id, w) in &self.template_weights {
            if template(id).is_none() {
                return Err(GenError::Config(format!("unknown template `{id}`")));
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(GenError::Config(format!("weight of `{id}` must be nonnegative")));
            }
        }
        Ok(())
    }

    fn template_weight(&self, t: &Template) -> f64 {
        self.template_weights.get(t.id).copied().unwrap_or(t.weight)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NlTaskPair {
    pub query: String,
    pub gold: Task,
    pub category: TaskCategory,
    pub referent_style: ReferentStyle,
    pub filter_count: usize,
    pub paraphrased: bool,
    pub combo: AttributeCombo,
    pub template: String,
}

/// Outcome of a generation run.
#[derive(Debug, Clone)]
pub struct Generated {
    pub pairs: Vec<NlTaskPair>,
    pub paraphrase_rejected: usize,
    /// Set when paraphrasing was requested but the endpoint failed; the run
    /// then continued with template pairs only.
    pub fallback: Option<String>,
}

/// Template pairs only. Deterministic in `config.seed`.
pub fn generate(config: &GenConfig, vocab: &Vocabulary) -> Result<Vec<NlTaskPair>, GenError> {
    generate_with(config, vocab, None).map(|g| g.pairs)
}

pub fn generate_with(
    config: &GenConfig,
    vocab: &Vocabulary,
    paraphraser: Option<&Paraphraser>,
) -> Result<Generated, GenError> {
    config.validate()?;
    let combos = gen_combos(config, vocab)?;
    let mut by_sig: BTreeMap<Signature, Vec<&AttributeCombo>> = BTreeMap::new();
    for c in &combos {
        by_sig.entry(c.signature).or_default().push(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cats: Vec<(TaskCategory, f64)> = config.category_weights.iter().map(|(k, v)| (*k, *v)).collect();
    let styles: Vec<(ReferentStyle, f64)> = config.referent_weights.iter().map(|(k, v)| (*k, *v)).collect();
    let cat_dist = WeightedIndex::new(cats.iter().map(|c| c.1)).map_err(|e| GenError::Config(e.to_string()))?;
    let style_dist = WeightedIndex::new(styles.iter().map(|c| c.1)).map_err(|e| GenError::Config(e.to_string()))?;

    let mut out = Generated {
        pairs: Vec::with_capacity(config.total_pairs),
        paraphrase_rejected: 0,
        fallback: None,
    };
    let paraphrasing = config.paraphrase && paraphraser.is_some();
    if config.paraphrase && paraphraser.is_none() {
        out.fallback = Some("no paraphrase endpoint configured".into());
    }
    while out.pairs.len() < config.total_pairs {
        let category = cats[cat_dist.sample(&mut rng)].0;
        let style = styles[style_dist.sample(&mut rng)].0;
        let candidates: Vec<&Template> = templates()
            .iter()
            .filter(|t| t.category == category && t.supports(style))
            .filter(|t| t.signatures.iter().any(|s| by_sig.contains_key(s)))
            .filter(|t| config.template_weight(t) > 0.0)
            .collect();
        let t = *candidates
            .choose_weighted(&mut rng, |t| config.template_weight(t))
            .map_err(|_| GenError::NoTemplate { category, style })?;
        let pool: Vec<&AttributeCombo> = t
            .signatures
            .iter()
            .filter_map(|s| by_sig.get(s))
            .flatten()
            .copied()
            .collect();
        let combo = *pool.choose(&mut rng).expect("pool checked nonempty");
        let pair = instantiate(t, combo, style, &mut rng)?;

        if paraphrasing && out.fallback.is_none() {
            let p = paraphraser.expect("checked");
            match p.paraphrase(&pair, config.paraphrases_per_pair) {
                Ok((accepted, rejected)) => {
                    out.paraphrase_rejected += rejected;
                    out.pairs.push(pair);
                    for a in accepted {
                        if out.pairs.len() < config.total_pairs {
                            out.pairs.push(a);
                        }
                    }
                }
                Err(e) => {
                    out.fallback = Some(e.to_string());
                    out.pairs.push(pair);
                }
            }
        } else {
            out.pairs.push(pair);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetStats {
    pub total: usize,
    pub categories: BTreeMap<TaskCategory, f64>,
    pub referent_styles: BTreeMap<ReferentStyle, f64>,
    pub mean_filter_count: f64,
    pub signatures: BTreeMap<Signature, usize>,
    pub templates: BTreeMap<String, usize>,
    pub paraphrased: usize,
}

/// Category and referent-style fractions plus the mean filter count.
/// `None` for an empty dataset.
pub fn dataset_stats(pairs: &[NlTaskPair]) -> Option<DatasetStats> {
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let mut categories: BTreeMap<TaskCategory, f64> = TaskCategory::ALL.iter().map(|c| (*c, 0.0)).collect();
    let mut referent_styles: BTreeMap<ReferentStyle, f64> = ReferentStyle::ALL.iter().map(|s| (*s, 0.0)).collect();
    let mut signatures = BTreeMap::new();
    let mut templates = BTreeMap::new();
    let mut filters = 0usize;
    for p in pairs {
        *categories.entry(p.category).or_default() += 1.0 / n;
        *referent_styles.entry(p.referent_style).or_default() += 1.0 / n;
        *signatures.entry(p.combo.signature).or_default() += 1;
        *templates.entry(p.template.clone()).or_default() += 1;
        filters += p.filter_count;
    }
    Some(DatasetStats {
        total: pairs.len(),
        categories,
        referent_styles,
        mean_filter_count: filters as f64 / n,
        signatures,
        templates,
        paraphrased: pairs.iter().filter(|p| p.paraphrased).count(),
    })
}

/// On-disk line: the gold task appears in grammar form and as JSON.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Record {
    query: String,
    gold: String,
    gold_task: Task,
    category: TaskCategory,
    referent_style: ReferentStyle,
    filter_count: usize,
    paraphrased: bool,
    combo: AttributeCombo,
    template: String,
}

pub fn write_jsonl(pairs: &[NlTaskPair], mut out: impl Write) -> Result<(), GenError> {
    for p in pairs {
        let r = Record {
            query: p.query.clone(),
            gold: serialize_task(&p.gold),
            gold_task: p.gold.clone(),
            category: p.category,
            referent_style: p.referent_style,
            filter_count: p.filter_count,
            paraphrased: p.paraphrased,
            combo: p.combo.clone(),
            template: p.template.clone(),
        };
        serde_json::to_writer(&mut out, &r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<NlTaskPair>, GenError> {
    let mut pairs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| GenError::Record { line: i + 1, message };
        let r: Record = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let parsed = parse_task_text(&r.gold).map_err(|e| bad(e.to_string()))?;
        if !literally_equal(&parsed, &r.gold_task) {
            return Err(bad("gold text and goldTask disagree".into()));
        }
        pairs.push(NlTaskPair {
            query: r.query,
            gold: r.gold_task,
            category: r.category,
            referent_style: r.referent_style,
            filter_count: r.filter_count,
            paraphrased: r.paraphrased,
            combo: r.combo,
            template: r.template,
        });
    }
    Ok(pairs)
}
