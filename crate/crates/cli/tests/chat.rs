use std::net::SocketAddr;
use std::time::Duration;

use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use vismanip_cli::chat::HttpChatClient;
use vismanip_core::translate::{
    ChatClient, ChatMessage, ChatRequest, QueryContext, RemoteConfig, RemoteError, RemoteTranslator, TranslateError,
    Translator,
};

fn spawn(router: Router) -> SocketAddr {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        tokio::runtime::Runtime::new().unwrap().block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(l, router).await.unwrap();
        })
    });
    addr
}

fn config(addr: SocketAddr, timeout: Duration) -> RemoteConfig {
    RemoteConfig {
        endpoint: format!("http://{addr}/v1/chat/completions"),
        api_key: Some("k".into()),
        model: "m".into(),
        timeout,
    }
}

fn reply(text: &str) -> Value {
    json!({"choices": [{"message": {"role": "assistant", "content": text}}]})
}

#[test]
fn remote_backend_round_trip() {
    let addr = spawn(Router::new().route(
        "/v1/chat/completions",
        post(|Json(req): Json<Value>| async move {
            assert_eq!(req["model"], "m");
            Json(reply("(identify consumption; filter: energy = coal, time = 2022)"))
        }),
    ));
    let tr = RemoteTranslator {
        client: HttpChatClient,
        config: config(addr, Duration::from_secs(5)),
    };
    let ctx = QueryContext::new(vismanip_core::demo::energy_spec());
    let rep = tr.translate("How much coal was used in 2022?", &ctx).unwrap();
    assert_eq!(rep.raw, "(identify consumption; filter: energy = coal, time = 2022)");
}

#[test]
fn slow_endpoint_times_out() {
    let addr = spawn(Router::new().route(
        "/v1/chat/completions",
        post(|| async {
            tokio::time::sleep(Duration::from_secs(3)).await;
            Json(reply("(identify x)"))
        }),
    ));
    let req = ChatRequest {
        model: "m".into(),
        messages: vec![ChatMessage::user("hi")],
        temperature: 0.0,
    };
    let err = HttpChatClient
        .complete(&config(addr, Duration::from_millis(300)), &req)
        .unwrap_err();
    assert_eq!(err, RemoteError::Timeout);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let tr = RemoteTranslator {
        client: HttpChatClient,
        config: config(addr, Duration::from_secs(2)),
    };
    let ctx = QueryContext::new(vismanip_core::demo::energy_spec());
    let err = tr.translate("How much coal?", &ctx).unwrap_err();
    assert!(matches!(err, TranslateError::RemoteUnavailable(_)), "{err}");
}
