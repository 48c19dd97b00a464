//! HTTP API over a [`SessionStore`].
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | `{"sample": "covid"}` or `{"spec": {...}}` |
//! | POST | `/sessions/:id/query` | `{"query": "..."}` |
//! | POST | `/sessions/:id/reset` | |
//! | GET | `/sessions/:id/history` | |
//! | GET | `/sessions/:id/snapshot` | |
//! | GET | `/healthz` | |

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use vismanip_core::chart::render_svg;
use vismanip_core::session::{SessionError, SessionStore};
use vismanip_core::translate::{TranslateError, Translator};
use vismanip_core::{demo, ChartSpec};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub translator: Arc<dyn Translator>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/sessions", post(create))
        .route("/sessions/:id/query", post(query))
        .route("/sessions/:id/reset", post(reset))
        .route("/sessions/:id/history", get(history))
        .route("/sessions/:id/snapshot", get(snapshot))
        .with_state(state)
}

pub struct ApiError(StatusCode, serde_json::Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::UnknownSession(_) => StatusCode::NOT_FOUND,
            SessionError::Translate(TranslateError::RemoteUnavailable(_)) => StatusCode::BAD_GATEWAY,
            SessionError::Translate(TranslateError::Timeout) => StatusCode::GATEWAY_TIMEOUT,
            SessionError::History { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, json!({"error": e.to_string(), "stage": e.stage()}))
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, json!({"error": message.into()}))
}

#[derive(Deserialize)]
struct CreateBody {
    sample: Option<String>,
    spec: Option<serde_json::Value>,
}

async fn create(State(app): State<AppState>, Json(body): Json<CreateBody>) -> Result<Response, ApiError> {
    let spec = match (body.sample, body.spec) {
        (Some(name), None) => demo::sample(&name).ok_or_else(|| bad_request(format!("unknown sample `{name}`")))?,
        (None, Some(value)) => ChartSpec::from_json(value).map_err(|e| bad_request(e.to_string()))?,
        _ => return Err(bad_request("give exactly one of `sample` and `spec`")),
    };
    let id = app.store.create(Arc::new(spec));
    let (hash, svg) = app
        .store
        .with(&id, |s| (s.state.state_hash(), render_svg(&s.state)))
        .map_err(ApiError::from)?;
    tracing::info!(session = %id, "session created");
    Ok((
        StatusCode::CREATED,
        Json(json!({"sessionId": id, "stateHash": hash, "svg": svg})),
    )
        .into_response())
}

#[derive(Deserialize)]
struct QueryBody {
    query: String,
}

async fn query(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<QueryBody>,
) -> Result<Response, ApiError> {
    let outcome = tokio::task::spawn_blocking(move || app.store.query(&id, &body.query, app.translator.as_ref()))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({"error": e.to_string()})))??;
    Ok(Json(outcome).into_response())
}

async fn reset(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let hash = app.store.reset(&id)?;
    Ok(Json(json!({"stateHash": hash})).into_response())
}

async fn history(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.store.history(&id)?).into_response())
}

async fn snapshot(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.store.snapshot(&id)?).into_response())
}

pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
