use crate::task::{FilterValue, Literal, Task};
use crate::time::Timestamp;
use crate::translate::{ChatClient, ChatMessage, ChatRequest, RemoteConfig, RemoteError};

use super::NlTaskPair;

/// Rewrites template queries through a chat-completion endpoint.
pub struct Paraphraser<'a> {
    pub config: RemoteConfig,
    pub client: &'a dyn ChatClient,
}

pub fn paraphrase_prompt(query: &str, n: usize) -> ChatRequest {
    ChatRequest {
        model: String::new(),
        messages: vec![
            ChatMessage::system(
                "Rewrite the question about a chart in different words. Keep every name, number and date \
                 exactly as written. Answer with one rewritten question per line and nothing else.",
            ),
            ChatMessage::user(format!("Give {n} rewrites of: {query}")),
        ],
        temperature: 0.9,
    }
}

/// Surface forms a rewrite must keep for the gold task to stay correct.
fn anchors(pair: &NlTaskPair) -> Vec<String> {
    fn literal(l: &Literal, out: &mut Vec<String>) {
        match l.as_timestamp() {
            Some(ts) => out.push(Timestamp::to_natural(&ts)),
            None => out.push(l.as_str().to_string()),
        }
    }
    fn walk(t: &Task, out: &mut Vec<String>) {
        for f in &t.filters {
            if f.is_rank() {
                continue;
            }
            match &f.value {
                FilterValue::Literal(l) => literal(l, out),
                FilterValue::Range(a, b) => {
                    literal(a, out);
                    literal(b, out);
                }
                FilterValue::List(ls) => ls.iter().for_each(|l| literal(l, out)),
                FilterValue::Aggregate(_) => {}
            }
        }
        t.subtasks.iter().for_each(|s| walk(s, out));
    }
    let mut out = Vec::new();
    walk(&pair.gold, &mut out);
    out.extend(
        pair.combo
            .attrs
            .iter()
            .filter(|a| pair.query.contains(&a.name))
            .map(|a| a.name.clone()),
    );
    out.iter().map(|s| s.to_lowercase()).collect()
}

impl Paraphraser<'_> {
    /// Up to `n` paraphrased copies of `pair`, plus the number of rewrites
    /// dropped because they lost a value of the gold task.
    pub fn paraphrase(&self, pair: &NlTaskPair, n: usize) -> Result<(Vec<NlTaskPair>, usize), RemoteError> {
        if n == 0 {
            return Ok((Vec::new(), 0));
        }
        let mut request = paraphrase_prompt(&pair.query, n);
        request.model = self.config.model.clone();
        let reply = self.client.complete(&self.config, &request)?;
        let need = anchors(pair);
        let (mut kept, mut rejected) = (Vec::new(), 0);
        for line in reply.lines().take(n) {
            let text = line
                .trim()
                .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ')' || c == '-')
                .trim();
            if text.is_empty() {
                continue;
            }
            let lower = text.to_lowercase();
            if text == pair.query || !need.iter().all(|a| lower.contains(a.as_str())) {
                rejected += 1;
                continue;
            }
            kept.push(NlTaskPair {
                query: text.to_string(),
                paraphrased: true,
                ..pair.clone()
            });
        }
        Ok((kept, rejected))
    }
}
