//! Chat-completion backend. The transport is abstracted behind
//! [`ChatClient`] so this crate stays free of network code.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, QueryContext, TranslateError, Translator, TranslatorReport};
use crate::chart::{AttrType, Resolver};
use crate::task::{parse_task_text, serialize_task, GRAMMAR_EBNF};

pub const ENV_ENDPOINT: &str = "VISMANIP_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "VISMANIP_LLM_API_KEY";
pub const ENV_MODEL: &str = "VISMANIP_LLM_MODEL";
pub const ENV_TIMEOUT: &str = "VISMANIP_LLM_TIMEOUT_SECS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl RemoteConfig {
    /// Read the configuration from the process environment. `None` when no
    /// endpoint is set.
    pub fn from_env() -> Option<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Option<Self> {
        let endpoint = get(ENV_ENDPOINT).filter(|e| !e.trim().is_empty())?;
        let timeout = get(ENV_TIMEOUT)
            .and_then(|t| t.trim().parse::<f64>().ok())
            .filter(|t| *t > 0.0)
            .unwrap_or(30.0);
        Some(RemoteConfig {
            endpoint,
            api_key: get(ENV_API_KEY).filter(|k| !k.is_empty()),
            model: get(ENV_MODEL).unwrap_or_else(|| "default".into()),
            timeout: Duration::from_secs_f64(timeout),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RemoteError {
    #[error("endpoint unavailable: {0}")]
    Unavailable(String),
    #[error("request timed out")]
    Timeout,
    #[error("unexpected response: {0}")]
    BadResponse(String),
}

impl From<RemoteError> for TranslateError {
    fn from(e: RemoteError) -> Self {
        match e {
            RemoteError::Timeout => TranslateError::Timeout,
            other => TranslateError::RemoteUnavailable(other.to_string()),
        }
    }
}

/// Transport for chat-completion requests. Implementations must honour
/// `config.timeout`.
pub trait ChatClient: Send + Sync {
    fn complete(&self, config: &RemoteConfig, request: &ChatRequest) -> Result<String, RemoteError>;
}

/// Pull the assistant text out of a chat-completion response body.
pub fn completion_text(body: &serde_json::Value) -> Result<String, RemoteError> {
    body.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| RemoteError::BadResponse("missing choices[0].message.content".into()))
}

const INSTRUCTIONS: &str = "You translate questions about a chart into a task written in the grammar below. \
Answer with exactly one task and nothing else. Use attribute names and category values exactly as listed. \
Refer to a series by its visual channel (for example color:green) only when the question does.";

const EXAMPLES: &str = "Question: What is the consumption of coal in 2022?\n\
Task: (identify consumption; filter: energy = coal, time = 2022)\n\
Question: Which industry has the highest Revenue in 2015Q1?\n\
Task: (identify industry; filter: Revenue = max(Revenue), time = 2015Q1)\n\
Question: What is the difference of price between apples and pears?\n\
Task: (compare price; derive: difference(apples, pears); sub: (identify price; filter: fruit = apples), (identify price; filter: fruit = pears))";

pub fn task_prompt(query: &str, ctx: &QueryContext) -> ChatRequest {
    let system = format!("{INSTRUCTIONS}\n\nGrammar (EBNF):\n{GRAMMAR_EBNF}\nExamples:\n{EXAMPLES}");
    let spec = &ctx.spec;
    let mut user = String::from("Chart attributes:\n");
    for a in &spec.attributes {
        let _ = match a.kind {
            AttrType::Categorical => {
                let shown: Vec<&str> = a.choices.iter().take(40).map(String::as_str).collect();
                writeln!(user, "- {} (categorical): {}", a.name, shown.join(", "))
            }
            AttrType::Temporal => match a.span {
                Some([lo, hi]) => writeln!(user, "- {} (temporal): {lo} to {hi}", a.name),
                None => writeln!(user, "- {} (temporal)", a.name),
            },
            AttrType::Quantitative => writeln!(user, "- {} (quantitative)", a.name),
        };
    }
    let _ = writeln!(
        user,
        "Mark: {}; x = {}, y = {}",
        spec.mark.as_str(),
        spec.encodings.x,
        spec.encodings.y
    );
    if !spec.channel_bindings.is_empty() {
        let b: Vec<String> = spec
            .channel_bindings
            .iter()
            .map(|b| format!("{}:{} = {}", b.channel.as_str(), b.value, b.choice))
            .collect();
        let _ = writeln!(user, "Channels: {}", b.join(", "));
    }
    if let Some(st) = &ctx.prior_state {
        for d in &st.view.derived_series {
            let p = &d.provenance;
            let ops: Vec<String> = p.operands.iter().map(|o| format!("{o:?}")).collect();
            let _ = writeln!(
                user,
                "Derived series `{}` = {}({})",
                d.name,
                p.kind.as_str(),
                ops.join(", ")
            );
        }
    }
    let _ = write!(user, "Question: {query}\nTask:");
    ChatRequest {
        model: String::new(),
        messages: vec![ChatMessage::system(system), ChatMessage::user(user)],
        temperature: 0.0,
    }
}

/// Trim code fences and chatter around the first parenthesised task.
fn extract_task_text(reply: &str) -> &str {
    let body = reply
        .trim()
        .trim_start_matches("```text")
        .trim_start_matches("```")
        .trim_end_matches("```")
        .trim();
    match body.find('(') {
        Some(i) => body[i..].trim_end_matches('.').trim(),
        None => body,
    }
}

pub fn translate_remote(
    query: &str,
    ctx: &QueryContext,
    config: &RemoteConfig,
    client: &dyn ChatClient,
) -> Result<TranslatorReport, TranslateError> {
    if query.trim().is_empty() {
        return Err(TranslateError::EmptyQuery);
    }
    let mut request = task_prompt(query, ctx);
    request.model = config.model.clone();
    let reply = client.complete(config, &request)?;
    let text = extract_task_text(&reply);
    let task = parse_task_text(text).map_err(|error| TranslateError::Format {
        raw: reply.clone(),
        error,
    })?;
    let resolver = match &ctx.prior_state {
        Some(st) => Resolver::for_state(st),
        None => Resolver::new(&ctx.spec),
    };
    resolver.normalize_task(&task)?;
    Ok(TranslatorReport {
        raw: serialize_task(&task),
        task,
        spans: BTreeMap::new(),
        backend: Backend::Remote,
    })
}

pub struct RemoteTranslator<C: ChatClient> {
    pub client: C,
    pub config: RemoteConfig,
}

impl<C: ChatClient> Translator for RemoteTranslator<C> {
    fn backend(&self) -> Backend {
        Backend::Remote
    }

    fn translate(&self, query: &str, ctx: &QueryContext) -> Result<TranslatorReport, TranslateError> {
        translate_remote(query, ctx, &self.config, &self.client)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::energy_spec;
    use std::sync::Mutex;

    struct Canned(Result<String, RemoteError>, Mutex<Vec<ChatRequest>>);

    impl ChatClient for Canned {
        fn complete(&self, _: &RemoteConfig, request: &ChatRequest) -> Result<String, RemoteError> {
            self.1.lock().unwrap().push(request.clone());
            self.0.clone()
        }
    }

    fn config() -> RemoteConfig {
        RemoteConfig::from_lookup(|k| (k == ENV_ENDPOINT).then(|| "http://localhost:1/v1/chat/completions".into()))
            .unwrap()
    }

    fn run(reply: Result<String, RemoteError>) -> Result<TranslatorReport, TranslateError> {
        let client = Canned(reply, Mutex::new(Vec::new()));
        let ctx = QueryContext::new(energy_spec());
        let out = translate_remote("What is the consumption of coal in 2022?", &ctx, &config(), &client);
        let sent = client.1.lock().unwrap();
        assert!(sent[0].messages[0].content.contains(GRAMMAR_EBNF));
        assert!(sent[0].messages[1].content.contains("consumption (quantitative)"));
        out
    }

    #[test]
    fn well_formed_reply_is_parsed() {
        let rep = run(Ok(
            "```\n(identify consumption; filter: energy = coal, time = 2022)\n```".into(),
        ))
        .unwrap();
        assert_eq!(rep.backend, Backend::Remote);
        assert_eq!(rep.raw, "(identify consumption; filter: energy = coal, time = 2022)");
    }

    #[test]
    fn unbalanced_reply_is_a_format_error() {
        let err = run(Ok("(identify consumption; filter: energy = coal".into())).unwrap_err();
        assert!(matches!(err, TranslateError::Format { .. }), "{err}");
        assert_eq!(err.raw(), Some("(identify consumption; filter: energy = coal"));
    }

    #[test]
    fn transport_failures_map_to_contract_errors() {
        assert!(matches!(
            run(Err(RemoteError::Unavailable("refused".into()))),
            Err(TranslateError::RemoteUnavailable(_))
        ));
        assert!(matches!(run(Err(RemoteError::Timeout)), Err(TranslateError::Timeout)));
    }

    #[test]
    fn unknown_attribute_in_reply_is_rejected() {
        let err = run(Ok("(identify weight; filter: energy = coal)".into())).unwrap_err();
        assert!(matches!(err, TranslateError::UnresolvableReference(_)), "{err}");
    }

    #[test]
    fn config_from_lookup() {
        assert!(RemoteConfig::from_lookup(|_| None).is_none());
        let c = RemoteConfig::from_lookup(|k| match k {
            ENV_ENDPOINT => Some("http://x".into()),
            ENV_TIMEOUT => Some("2.5".into()),
            ENV_MODEL => Some("m".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.timeout, Duration::from_millis(2500));
        assert_eq!(c.model, "m");
        assert_eq!(c.api_key, None);
        let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "(identify x)"}}]});
        assert_eq!(completion_text(&body).unwrap(), "(identify x)");
    }
}
