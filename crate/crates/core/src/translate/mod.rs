//! Natural-language query to [`Task`] translation.
//!
//! Two backends share one contract: [`RulesTranslator`], a deterministic
//! keyword and pattern translator, and [`RemoteTranslator`], a client for a
//! chat-completion endpoint that is asked to answer in the task grammar.

pub(crate) mod lexicon;
pub mod remote;
mod rules;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chart::{ChartError, ChartSpec, ChartState};
use crate::task::{AttributeRef, DeriveSpec, Filter, FormatError, Task, TaskKind};

pub use remote::{translate_remote, ChatClient, ChatMessage, ChatRequest, RemoteConfig, RemoteError, RemoteTranslator};
pub use rules::RulesTranslator;

/// Everything a translator may consult besides the query text.
#[derive(Debug, Clone)]
pub struct QueryContext {
    pub spec: Arc<ChartSpec>,
    /// Chart state left by the previous query of a session, so that a query
    /// can refer to series derived earlier ("that sum").
    pub prior_state: Option<ChartState>,
    /// BCP 47 tag; only decides day/month order in numeric dates.
    pub locale: String,
}

impl QueryContext {
    pub fn new(spec: impl Into<Arc<ChartSpec>>) -> Self {
        QueryContext {
            spec: spec.into(),
            prior_state: None,
            locale: "en-US".into(),
        }
    }

    pub fn for_state(state: &ChartState) -> Self {
        QueryContext {
            spec: state.spec.clone(),
            prior_state: Some(state.clone()),
            locale: "en-US".into(),
        }
    }

    pub fn with_locale(mut self, locale: impl Into<String>) -> Self {
        self.locale = locale.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rules,
    Remote,
}

/// Character offsets `[start, end)` into the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    /// The spanned text of `query`.
    pub fn slice<'q>(&self, query: &'q str) -> &'q str {
        let mut idx = query.char_indices().map(|(i, _)| i).chain(std::iter::once(query.len()));
        let start = idx.nth(self.start).unwrap_or(query.len());
        let end = query
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(query.len()))
            .nth(self.end)
            .unwrap_or(query.len());
        &query[start..end]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatorReport {
    pub task: Task,
    /// Task paths such as `filters[1]` or `subtasks[0].target`.
    pub spans: BTreeMap<String, Span>,
    pub backend: Backend,
    /// The backend's raw answer in grammar form.
    pub raw: String,
}

/// A referent found in a query.
#[derive(Debug, Clone, PartialEq)]
pub struct Referent {
    pub reference: AttributeRef,
    pub span: Span,
}

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("unparseable query: {0}")]
    UnparseableQuery(String),
    #[error("unresolvable reference `{0}`")]
    UnresolvableReference(String),
    #[error("ambiguous reference `{reference}` (candidates: {})", candidates.join(", "))]
    AmbiguousReference { reference: String, candidates: Vec<String> },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("remote backend unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("remote backend timed out")]
    Timeout,
    #[error("malformed task `{raw}`: {error}")]
    Format { raw: String, error: FormatError },
}

impl TranslateError {
    /// Raw backend output carried by the error, if any.
    pub fn raw(&self) -> Option<&str> {
        match self {
            TranslateError::Format { raw, .. } => Some(raw),
            _ => None,
        }
    }
}

impl From<ChartError> for TranslateError {
    fn from(e: ChartError) -> Self {
        match e {
            ChartError::Unresolvable(r) => TranslateError::UnresolvableReference(r),
            ChartError::Ambiguous { reference, candidates } => {
                TranslateError::AmbiguousReference { reference, candidates }
            }
            ChartError::Inconsistent(r) => TranslateError::AmbiguousReference {
                reference: r,
                candidates: Vec::new(),
            },
            ChartError::TypeMismatch(m) => TranslateError::TypeMismatch(m),
            other => TranslateError::TypeMismatch(other.to_string()),
        }
    }
}

pub trait Translator: Send + Sync {
    fn backend(&self) -> Backend;
    fn translate(&self, query: &str, ctx: &QueryContext) -> Result<TranslatorReport, TranslateError>;
}

/// Translate with the default rules backend.
pub fn translate(query: &str, ctx: &QueryContext) -> Result<TranslatorReport, TranslateError> {
    RulesTranslator::default().translate(query, ctx)
}

pub fn detect_operation(query: &str) -> Result<TaskKind, TranslateError> {
    rules::detect_operation(&query.to_ascii_lowercase()).map(|(k, _)| k)
}

pub fn extract_referents(query: &str, ctx: &QueryContext) -> Result<Vec<Referent>, TranslateError> {
    RulesTranslator::default().referents(query, ctx)
}

pub fn extract_filters(query: &str, ctx: &QueryContext) -> Result<Vec<Filter>, TranslateError> {
    RulesTranslator::default().filters(query, ctx)
}

pub fn detect_derivation(query: &str, ctx: &QueryContext) -> Result<Option<DeriveSpec>, TranslateError> {
    RulesTranslator::default().derivation(query, ctx)
}
