//! HTTP surface. Handlers are thin: they decode the request, run the
//! matching [`Service`] call on the blocking pool and encode the result.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use kgtriage_core::curation::{CurationError, Verdict};
use kgtriage_core::diagnosis::DiagnosisError;
use kgtriage_core::ingestion::Document;

use crate::service::{Service, ServiceError};
use crate::session::SessionError;

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

impl ApiError {
    fn status(&self) -> (StatusCode, &'static str) {
        match &self.0 {
            ServiceError::GraphNotLoaded => (StatusCode::SERVICE_UNAVAILABLE, "graph-not-loaded"),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not-found"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad-request"),
            ServiceError::Session(SessionError::WrongState { .. }) => (StatusCode::CONFLICT, "wrong-state"),
            ServiceError::Session(SessionError::UnexpectedSymptom(_)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "unexpected-symptom")
            }
            ServiceError::Session(SessionError::Diagnosis(e)) | ServiceError::Diagnosis(e) => diagnosis_status(e),
            ServiceError::Curation(CurationError::UnknownItem(_)) => (StatusCode::NOT_FOUND, "unknown-item"),
            ServiceError::Curation(CurationError::RevisionConflict { .. }) => (StatusCode::CONFLICT, "revision-conflict"),
            ServiceError::Curation(CurationError::AlreadyDecided { .. }) => (StatusCode::CONFLICT, "already-decided"),
            ServiceError::Curation(_) | ServiceError::Graph(_) | ServiceError::Data(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "data-error")
            }
            ServiceError::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "io-error"),
        }
    }
}

fn diagnosis_status(e: &DiagnosisError) -> (StatusCode, &'static str) {
    match e {
        DiagnosisError::NoDiseases => (StatusCode::SERVICE_UNAVAILABLE, "graph-not-loaded"),
        DiagnosisError::ScorerUnavailable(_) | DiagnosisError::ScorerProtocol(_) => {
            (StatusCode::BAD_GATEWAY, "scorer-unavailable")
        }
        _ => (StatusCode::UNPROCESSABLE_ENTITY, "diagnosis-error"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = self.status();
        (status, Json(ErrorBody { error, message: self.0.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T, F>(svc: Arc<Service>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&svc)).await {
        Ok(r) => r.map(Json).map_err(ApiError),
        Err(e) => Err(ApiError(ServiceError::Data(format!("worker failed: {e}")))),
    }
}

#[derive(Debug, Deserialize)]
struct StartSession {
    text: String,
}

#[derive(Debug, Deserialize)]
struct Answer {
    symptom: String,
    present: bool,
}

#[derive(Debug, Deserialize)]
struct IngestRequest {
    documents: Vec<Document>,
    #[serde(default)]
    lexicon: Option<String>,
    #[serde(default)]
    patterns: Option<String>,
}

#[derive(Debug, Deserialize)]
struct QueueParams {
    #[serde(default)]
    all: bool,
}

#[derive(Debug, Deserialize)]
struct VerdictRequest {
    verdict: Verdict,
    reviewer: String,
    revision: u64,
    #[serde(default)]
    note: Option<String>,
}

/// One-shot diagnosis. Either `symptoms` (ids, labels or aliases) or free
/// `text` must be given.
#[derive(Debug, Deserialize)]
pub struct DiagnoseRequest {
    #[serde(default = "default_query_id")]
    pub query_id: String,
    #[serde(default)]
    pub symptoms: Option<Vec<String>>,
    #[serde(default)]
    pub text: Option<String>,
}

pub fn default_query_id() -> String {
    "query".to_string()
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/stats", get(stats))
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/close", post(close_session))
        .route("/ingest", post(ingest))
        .route("/graph/export", get(export_graph))
        .route("/review/queue", get(review_queue))
        .route("/review/{item}/verdict", post(verdict))
        .route("/diagnose", post(diagnose))
        .with_state(service)
}

async fn healthz(State(svc): State<Arc<Service>>) -> impl IntoResponse {
    blocking(svc, |s| s.health()).await
}

async fn stats(State(svc): State<Arc<Service>>) -> impl IntoResponse {
    blocking(svc, |s| s.stats()).await
}

async fn start_session(State(svc): State<Arc<Service>>, Json(req): Json<StartSession>) -> impl IntoResponse {
    blocking(svc, move |s| s.start_session(&req.text))
        .await
        .map(|body| (StatusCode::CREATED, body))
}

async fn get_session(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(svc, move |s| s.session(&id)).await
}

async fn answer(State(svc): State<Arc<Service>>, Path(id): Path<String>, Json(req): Json<Answer>) -> impl IntoResponse {
    blocking(svc, move |s| s.answer(&id, &req.symptom, req.present)).await
}

async fn close_session(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> impl IntoResponse {
    blocking(svc, move |s| s.close_session(&id)).await
}

async fn ingest(State(svc): State<Arc<Service>>, Json(req): Json<IngestRequest>) -> impl IntoResponse {
    blocking(svc, move |s| {
        s.set_resources(req.lexicon.as_deref(), req.patterns.as_deref())?;
        s.ingest(&req.documents)
    })
    .await
}

async fn export_graph(State(svc): State<Arc<Service>>) -> Result<Response, ApiError> {
    let Json(body) = blocking(svc, |s| s.export_graph()).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn review_queue(State(svc): State<Arc<Service>>, Query(params): Query<QueueParams>) -> impl IntoResponse {
    blocking(svc, move |s| Ok(s.review_queue(params.all))).await
}

async fn verdict(
    State(svc): State<Arc<Service>>,
    Path(item): Path<String>,
    Json(req): Json<VerdictRequest>,
) -> impl IntoResponse {
    blocking(svc, move |s| s.verdict(&item, req.verdict, &req.reviewer, req.revision, req.note)).await
}

async fn diagnose(State(svc): State<Arc<Service>>, Json(req): Json<DiagnoseRequest>) -> Result<Response, ApiError> {
    let Json(outcome) = blocking(svc, move |s| {
        let query = match (&req.symptoms, &req.text) {
            (Some(symptoms), _) => s.query_from_symptoms(&req.query_id, symptoms)?,
            (None, Some(text)) => s.query_from_text(&req.query_id, text)?,
            (None, None) => return Err(ServiceError::BadRequest("give `symptoms` or `text`".into())),
        };
        s.diagnose(&query)
    })
    .await?;
    // same rendering as the CLI
    let body = crate::render(&outcome);
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}
