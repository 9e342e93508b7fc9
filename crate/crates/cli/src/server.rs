//! JSON HTTP API over an immutable [`EngineState`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use quill_core::engine::{Classic, EngineState, GenerateOptions, SuggestResponse};
use quill_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub const DEFAULT_K: usize = 5;
/// Upper bound on a single generation request.
pub const MAX_WORDS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ErrorCode {
    BadRequest,
    ModelNotLoaded,
    Internal,
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            code: ErrorCode::BadRequest,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.code {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::ModelNotLoaded | ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_) | CoreError::SeedOutOfVocabulary => ApiError::bad_request(e.to_string()),
            other => ApiError {
                code: ErrorCode::Internal,
                message: other.to_string(),
            },
        }
    }
}

/// `None` when no model is loaded; model endpoints then answer
/// `modelNotLoaded`.
pub type AppState = Option<Arc<EngineState>>;

fn engine(state: &AppState) -> Result<Arc<EngineState>, ApiError> {
    state.clone().ok_or(ApiError {
        code: ErrorCode::ModelNotLoaded,
        message: "no model loaded".into(),
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        code: ErrorCode::Internal,
        message: e.to_string(),
    })?
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok" })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ModelInfo {
    vocab_size: usize,
    context_length: usize,
    hidden_size: usize,
    embedding_dim: usize,
}

async fn model_info(State(state): State<AppState>) -> Result<Json<ModelInfo>, ApiError> {
    let e = engine(&state)?;
    let cfg = e.config();
    Ok(Json(ModelInfo {
        vocab_size: e.vocab().len(),
        context_length: cfg.context_length,
        hidden_size: cfg.hidden_size,
        embedding_dim: cfg.embedding_dim,
    }))
}

async fn classics(State(state): State<AppState>) -> Result<Json<Vec<Classic>>, ApiError> {
    Ok(Json(engine(&state)?.list_classics().to_vec()))
}

#[derive(Deserialize)]
struct SuggestRequest {
    text: String,
    k: Option<usize>,
}

async fn suggest(
    State(state): State<AppState>,
    body: Result<Json<SuggestRequest>, JsonRejection>,
) -> Result<Json<SuggestResponse>, ApiError> {
    let Json(req) = body?;
    let e = engine(&state)?;
    let k = req.k.unwrap_or(DEFAULT_K);
    if k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let k = k.min(e.vocab().len());
    blocking(move || Ok(e.suggest(&req.text, k)?)).await.map(Json)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GenerateRequest {
    seed_text: String,
    num_words: usize,
    #[serde(default)]
    substitute: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct GenerateResponse {
    processed_seed: String,
    text: String,
}

async fn generate(
    State(state): State<AppState>,
    body: Result<Json<GenerateRequest>, JsonRejection>,
) -> Result<Json<GenerateResponse>, ApiError> {
    let Json(req) = body?;
    let e = engine(&state)?;
    if req.num_words == 0 || req.num_words > MAX_WORDS {
        return Err(ApiError::bad_request(format!("numWords must be between 1 and {MAX_WORDS}")));
    }
    let opts = GenerateOptions {
        substitute: req.substitute,
        ..GenerateOptions::default()
    };
    let g = blocking(move || Ok(e.generate(&req.seed_text, req.num_words, opts)?)).await?;
    Ok(Json(GenerateResponse {
        processed_seed: g.processed_seed_text(),
        text: quill_core::detokenize(&g.continuation),
    }))
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/model", get(model_info))
        .route("/api/classics", get(classics))
        .route("/api/suggest", post(suggest))
        .route("/api/generate", post(generate))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until Ctrl-C. A busy port is reported as an error
/// before any request is accepted.
pub async fn serve(state: Arc<EngineState>, addr: SocketAddr, static_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {addr}: {e}"))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Some(state), static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
