use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vismanip_cli::server::{router, AppState};
use vismanip_core::session::SessionStore;
use vismanip_core::translate::RulesTranslator;
use vismanip_core::PlanPolicy;

fn app() -> axum::Router {
    router(AppState {
        store: Arc::new(SessionStore::new(8, PlanPolicy::default())),
        translator: Arc::new(RulesTranslator::default()),
    })
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health() {
    let (status, body) = call(&app(), "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn session_lifecycle() {
    let app = app();
    let (status, created) = call(&app, "POST", "/sessions", Some(json!({"sample": "energy"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["sessionId"].as_str().unwrap().to_string();
    let initial_hash = created["stateHash"].as_str().unwrap().to_string();
    assert!(created["svg"].as_str().unwrap().starts_with("<svg"));

    let (status, out) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/query"),
        Some(json!({"query": "What is the consumption of coal in 2022?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(
        out["task"],
        "(identify consumption; filter: energy = coal, time = 2022)"
    );
    let frames = out["keyframes"].as_array().unwrap();
    assert_eq!(frames.len(), out["plan"].as_array().unwrap().len() + 1);
    let after = out["stateHash"].as_str().unwrap().to_string();

    // a failing query reports its stage and changes nothing
    let (status, err) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/query"),
        Some(json!({"query": "coal please"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["stage"], "translate");

    let (_, hist) = call(&app, "GET", &format!("/sessions/{id}/history"), None).await;
    let hist = hist.as_array().unwrap();
    assert_eq!(hist.len(), 1);
    assert_eq!(hist[0]["kind"], "query");
    assert_eq!(hist[0]["stateHash"], after.as_str());

    let (status, reset) = call(&app, "POST", &format!("/sessions/{id}/reset"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reset["stateHash"], initial_hash.as_str());
    let (_, hist) = call(&app, "GET", &format!("/sessions/{id}/history"), None).await;
    assert_eq!(hist[1]["kind"], "reset");

    let (status, snap) = call(&app, "GET", &format!("/sessions/{id}/snapshot"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snap["history"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn unknown_session_and_bad_bodies() {
    let app = app();
    let (status, _) = call(&app, "GET", "/sessions/nope/history", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"sample": "weather"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"spec": {"attributes": []}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn inline_spec() {
    let app = app();
    let spec = vismanip_core::demo::fruit_spec().to_json();
    let (status, created) = call(&app, "POST", "/sessions", Some(json!({"spec": spec}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["sessionId"].as_str().unwrap();
    let (status, out) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/query"),
        Some(json!({"query": "Which fruit has the highest price?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
}
