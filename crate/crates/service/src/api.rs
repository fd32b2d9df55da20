//! HTTP routes and JSON error mapping.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use preftree::optimize::RunError;
use preftree::{Choice, FeatureSchema, RunConfig, SessionTrace, Strategy};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::store::{ModelView, SessionView, Store, StoreError};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest { field: Option<String>, message: String },
    Store(StoreError),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Store(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error, message, field) = match self {
            ApiError::BadRequest { field, message } => (StatusCode::BAD_REQUEST, "bad_request", message, field),
            ApiError::Store(e) => {
                let (status, error) = match &e {
                    StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
                    StoreError::Busy | StoreError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
                    StoreError::Run(RunError::NoPending | RunError::BudgetExhausted) => {
                        (StatusCode::CONFLICT, "conflict")
                    }
                    _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
                };
                if status == StatusCode::INTERNAL_SERVER_ERROR {
                    tracing::error!(error = %e, "request failed");
                }
                (status, error, e.to_string(), None)
            }
        };
        let body = ErrorBody {
            error: error.to_string(),
            message,
            field,
        };
        (status, Json(body)).into_response()
    }
}

/// Parses a JSON body, reporting the path of the offending field.
fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::BadRequest {
            field: (path != ".").then_some(path),
            message: e.into_inner().to_string(),
        }
    })
}

/// Optional changes to the default run configuration.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub initial_pairs: Option<usize>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub strategy: Option<Strategy>,
    pub pool_size: Option<usize>,
    pub prioritize_within_leaf: Option<bool>,
    pub min_split_score: Option<usize>,
    pub min_samples_split: Option<usize>,
    pub max_depth: Option<usize>,
    pub sigma_noise: Option<f64>,
    pub sigma_prior: Option<f64>,
}

impl ConfigOverrides {
    pub fn apply(&self) -> Result<RunConfig, ApiError> {
        let bad = |field: &str, message: &str| ApiError::BadRequest {
            field: Some(format!("config.{field}")),
            message: message.to_string(),
        };
        let mut cfg = RunConfig::default().with_seed(self.seed.unwrap_or(0));
        if let Some(v) = self.initial_pairs {
            cfg.initial_pairs = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if cfg.budget() == 0 {
            return Err(bad("iterations", "initial_pairs + iterations must be at least 1"));
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = self.pool_size {
            if v < 2 {
                return Err(bad("pool_size", "must be at least 2"));
            }
            cfg.acquisition.pool_size = v;
        }
        if let Some(v) = self.prioritize_within_leaf {
            cfg.acquisition.prioritize_within_leaf = v;
        }
        if let Some(v) = self.min_split_score {
            cfg.tree.min_split_score = v;
        }
        if let Some(v) = self.min_samples_split {
            if v < 1 {
                return Err(bad("min_samples_split", "must be at least 1"));
            }
            cfg.tree.min_samples_split = v;
        }
        if let Some(v) = self.max_depth {
            cfg.tree.max_depth = v;
        }
        for (name, value, slot) in [
            ("sigma_noise", self.sigma_noise, &mut cfg.noise.sigma_noise),
            ("sigma_prior", self.sigma_prior, &mut cfg.noise.sigma_prior),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(bad(name, "must be positive and finite"));
                }
                *slot = v;
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub schema: FeatureSchema,
    #[serde(default)]
    pub config: ConfigOverrides,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub choice: Choice,
    /// Step of the pair being answered; a mismatch is a conflict, which
    /// turns a repeated submit into a no-op for the client.
    pub step: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FinishResponse {
    pub session: SessionView,
    pub model: ModelView,
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/pending", get(pending))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/model", get(model))
        .route("/sessions/{id}/finish", post(finish))
        .route("/sessions/{id}/trace", get(trace))
        .with_state(store)
}

async fn create(State(store): State<Arc<Store>>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let key = match headers.get(IDEMPOTENCY_HEADER) {
        None => None,
        Some(v) => Some(
            v.to_str()
                .ok()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| ApiError::BadRequest {
                    field: Some("Idempotency-Key".into()),
                    message: "header must be non-empty visible ASCII".into(),
                })?
                .to_string(),
        ),
    };
    let request: CreateRequest = parse_body(&body)?;
    let cfg = request.config.apply()?;
    let (snapshot, created) = store.create(request.schema, cfg, key).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(snapshot.view.clone())).into_response())
}

async fn pending(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(store.get(&id)?.snapshot().view.clone()))
}

async fn answer(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    // unknown sessions are reported before body errors
    store.get(&id)?;
    let request: AnswerRequest = parse_body(&body)?;
    let snapshot = store.answer(&id, request.choice, request.step).await?;
    Ok(Json(snapshot.view.clone()))
}

async fn model(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Json<ModelView>, ApiError> {
    Ok(Json(store.get(&id)?.snapshot().model.clone()))
}

async fn finish(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Json<FinishResponse>, ApiError> {
    let snapshot = store.finish(&id).await?;
    Ok(Json(FinishResponse {
        session: snapshot.view.clone(),
        model: snapshot.model.clone(),
    }))
}

async fn trace(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Json<SessionTrace>, ApiError> {
    Ok(Json(SessionTrace {
        records: store.get(&id)?.snapshot().trace.clone(),
    }))
}
