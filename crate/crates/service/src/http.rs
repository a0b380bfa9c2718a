use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use hidss_core::canonical;
use hidss_core::matching::MentorProfile;
use hidss_core::{Milestone, VentureId, VersionRef};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::app::{CreateVersion, Hidss, JudgmentSubmission, OutcomeSubmission, RegisterVenture};
use crate::error::ApiError;

/// Header naming the caller. Recorded on every event the request appends.
pub const ACTOR_HEADER: &str = "x-hidss-actor";

/// Default number of mentors per dimension for `/matches`.
pub const DEFAULT_MATCH_K: usize = 3;

type AppState = Arc<Hidss>;
type ApiResult = Result<Response, ApiError>;

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/ventures", post(register_venture))
        .route("/ventures/{id}", get(get_venture))
        .route("/ventures/{id}/versions", post(create_version))
        .route("/ventures/{id}/versions/{n}", get(get_version))
        .route("/ventures/{id}/matches", get(matches))
        .route("/ventures/{id}/versions/{n}/judgments", post(submit_judgment))
        .route("/ventures/{id}/versions/{n}/guidance", get(guidance))
        .route("/ventures/{id}/outcomes", post(record_outcome))
        .route("/admin/retrain", post(retrain))
        .route("/patterns/stats", get(pattern_stats))
        .route("/mentors", get(list_mentors).post(register_mentor))
        .fallback(not_found)
        .with_state(app)
}

/// Renders `value` as a canonical document.
pub fn canonical_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match canonical::to_string(value) {
        Ok(body) => (status, [(header::CONTENT_TYPE, canonical::CONTENT_TYPE)], body).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn ok<T: Serialize>(value: &T) -> ApiResult {
    Ok(canonical_response(StatusCode::OK, value))
}

fn created<T: Serialize>(value: &T) -> ApiResult {
    Ok(canonical_response(StatusCode::CREATED, value))
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("malformed_body", e.to_string(), None))
}

fn actor(headers: &HeaderMap) -> Option<String> {
    headers.get(ACTOR_HEADER).and_then(|v| v.to_str().ok()).map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned)
}

fn version_ref(id: String, n: &str) -> Result<VersionRef, ApiError> {
    let version = n
        .parse::<u32>()
        .map_err(|_| ApiError::bad_request("invalid_version", format!("`{n}` is not a version number"), Some("version")))?;
    Ok(VersionRef::new(VentureId::new(id), version))
}

/// Runs blocking repository work off the async executor.
async fn blocking<T, F>(app: AppState, f: F) -> Result<T, ApiError>
where
    F: FnOnce(&Hidss) -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&app)).await.map_err(|e| ApiError::internal(e.to_string()))?
}

async fn register_venture(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: RegisterVenture = parse_body(&body)?;
    let actor = actor(&headers);
    let summary = blocking(app, move |a| a.register_venture(req, actor.as_deref())).await?;
    created(&summary)
}

async fn get_venture(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(&app.venture(&VentureId::new(id))?)
}

async fn create_version(State(app): State<AppState>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: CreateVersion = parse_body(&body)?;
    let actor = actor(&headers);
    let version = blocking(app, move |a| a.create_version(&VentureId::new(id), req, actor.as_deref())).await?;
    created(&version)
}

async fn get_version(State(app): State<AppState>, Path((id, n)): Path<(String, String)>) -> ApiResult {
    ok(&app.version(&version_ref(id, &n)?)?)
}

async fn matches(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult {
    let k = match query.get("k") {
        None => DEFAULT_MATCH_K,
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| ApiError::bad_request("invalid_k", format!("`{raw}` is not a count"), Some("k")))?,
    };
    ok(&app.matches(&VentureId::new(id), k)?)
}

async fn submit_judgment(
    State(app): State<AppState>,
    Path((id, n)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let vref = version_ref(id, &n)?;
    let req: JudgmentSubmission = parse_body(&body)?;
    let actor = actor(&headers);
    let receipt = blocking(app, move |a| a.submit_judgment(&vref, req, actor.as_deref())).await?;
    created(&receipt)
}

async fn guidance(State(app): State<AppState>, Path((id, n)): Path<(String, String)>, headers: HeaderMap) -> ApiResult {
    let vref = version_ref(id, &n)?;
    let actor = actor(&headers);
    let report = blocking(app, move |a| a.guidance(&vref, actor.as_deref())).await?;
    ok(&report)
}

async fn record_outcome(State(app): State<AppState>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let req: OutcomeSubmission = parse_body(&body)?;
    let actor = actor(&headers);
    let receipt = blocking(app, move |a| a.record_outcome(&VentureId::new(id), req, actor.as_deref())).await?;
    created(&receipt)
}

async fn retrain(State(app): State<AppState>) -> ApiResult {
    let summary = blocking(app, |a| a.retrain()).await?;
    ok(&summary)
}

async fn pattern_stats(State(app): State<AppState>, Query(query): Query<HashMap<String, String>>) -> ApiResult {
    let raw = query
        .get("milestone")
        .ok_or_else(|| ApiError::bad_request("missing_milestone", "query parameter `milestone` is required", Some("milestone")))?;
    let milestone: Milestone =
        raw.parse().map_err(|e: hidss_core::common::ParseEnumError| ApiError::bad_request("invalid_milestone", e.to_string(), Some("milestone")))?;
    ok(&app.pattern_stats(milestone))
}

async fn list_mentors(State(app): State<AppState>) -> ApiResult {
    ok(&app.mentors())
}

async fn register_mentor(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let profile: MentorProfile = parse_body(&body)?;
    let actor = actor(&headers);
    let profile = blocking(app, move |a| a.register_mentor(profile, actor.as_deref())).await?;
    created(&profile)
}

async fn not_found() -> ApiError {
    ApiError::not_found("no_route", "no such endpoint", None)
}
