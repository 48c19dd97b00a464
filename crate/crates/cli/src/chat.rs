use std::io::ErrorKind;

use vismanip_core::translate::remote::completion_text;
use vismanip_core::translate::{ChatClient, ChatRequest, RemoteConfig, RemoteError};

/// Blocking chat-completion transport over HTTP.
#[derive(Debug, Default, Clone, Copy)]
pub struct HttpChatClient;

impl ChatClient for HttpChatClient {
    fn complete(&self, config: &RemoteConfig, request: &ChatRequest) -> Result<String, RemoteError> {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        let mut call = agent.post(&config.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &config.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let response = call.send_json(request).map_err(|e| match e {
            ureq::Error::Status(code, r) => {
                RemoteError::Unavailable(format!("HTTP {code}: {}", r.into_string().unwrap_or_default()))
            }
            ureq::Error::Transport(t) => {
                let timed_out = std::error::Error::source(&t)
                    .and_then(|s| s.downcast_ref::<std::io::Error>())
                    .is_some_and(|io| matches!(io.kind(), ErrorKind::TimedOut | ErrorKind::WouldBlock));
                if timed_out {
                    RemoteError::Timeout
                } else {
                    RemoteError::Unavailable(t.to_string())
                }
            }
        })?;
        let body: serde_json::Value = response
            .into_json()
            .map_err(|e| RemoteError::BadResponse(e.to_string()))?;
        completion_text(&body)
    }
}
