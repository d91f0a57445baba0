use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ocelink_core::integrate::DEFAULT_PREVIEW_LIMIT;
use ocelink_core::ocel::ApplyOptions;
use ocelink_core::{pipeline, Error, IntegrationSpec, Workspace};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::{openapi_document, ApiError, ServerConfig, BASE_PATH, CONTENT_HASH_HEADER};

type AppState = Arc<ServerConfig>;
type ApiResult<T> = Result<T, ApiError>;

pub(crate) fn build(state: AppState) -> Router {
    let api = Router::new()
        .route("/health", get(|| async { Json(serde_json::json!({"status": "ok"})) }))
        .route("/openapi.json", get(|| async { Json(openapi_document()) }))
        .route("/workspaces", get(list_workspaces).post(create_workspace))
        .route("/workspaces/:ws/iot/uploads", post(upload_iot))
        .route("/workspaces/:ws/iot/uploads/:hash/mapping", get(infer_mapping))
        .route("/workspaces/:ws/iot/uploads/:hash/normalize", post(normalize))
        .route("/workspaces/:ws/iot/summary", get(summary))
        .route("/workspaces/:ws/ocel", post(upload_ocel))
        .route("/workspaces/:ws/ocel/stats", get(stats))
        .route("/workspaces/:ws/ocel/dfg", get(dfg))
        .route("/workspaces/:ws/ocel/violations", get(violations))
        .route("/workspaces/:ws/ocel/download", get(download))
        .route("/workspaces/:ws/plans", get(list_plans).post(create_plan))
        .route("/workspaces/:ws/plans/:id", get(get_plan))
        .route("/workspaces/:ws/plans/:id/execute", post(execute_plan))
        .route("/workspaces/:ws/jobs", get(list_jobs))
        .route("/workspaces/:ws/jobs/:id", get(get_job))
        .route("/workspaces/:ws/ledger", get(ledger))
        .route_layer(middleware::from_fn_with_state(state.clone(), authorize));

    let origin = match state.cors_origin.as_deref().and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::from(Any),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers(Any)
        .expose_headers([header::HeaderName::from_static(CONTENT_HASH_HEADER)]);

    Router::new().nest(BASE_PATH, api).layer(cors).with_state(state)
}

async fn authorize(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let open = req.uri().path().ends_with("/health") || req.uri().path().ends_with("/openapi.json");
    if let (Some(token), false) = (&state.token, open) {
        let expected = format!("Bearer {token}");
        let given = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn workspace_dir(state: &ServerConfig, id: &str) -> ApiResult<PathBuf> {
    if !valid_id(id) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", "workspace ids use [A-Za-z0-9_-]")
            .with_field("workspace"));
    }
    Ok(state.base_dir.join(id))
}

/// Runs blocking engine work on the blocking pool against an existing
/// workspace.
async fn with_ws<T, F>(state: AppState, id: String, work: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Workspace) -> Result<T, Error> + Send + 'static,
{
    let dir = workspace_dir(&state, &id)?;
    tokio::task::spawn_blocking(move || {
        let ws = Workspace::open(&dir)
            .map_err(|_| Error::NotFound(format!("workspace {id:?}")))?;
        work(&ws)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
    .map_err(ApiError::from)
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(ApiError::bad_json)
}

#[derive(Debug, Serialize, Deserialize)]
struct CreateWorkspace {
    name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct WorkspaceInfo {
    workspace_id: String,
}

async fn create_workspace(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<WorkspaceInfo>)> {
    let req: CreateWorkspace = parse_json(&body)?;
    let dir = workspace_dir(&state, &req.name).map_err(|e| e.with_field("name"))?;
    tokio::task::spawn_blocking(move || Workspace::init(dir))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::from(Error::from(e)))?;
    Ok((StatusCode::CREATED, Json(WorkspaceInfo { workspace_id: req.name })))
}

async fn list_workspaces(State(state): State<AppState>) -> ApiResult<Json<Vec<WorkspaceInfo>>> {
    let mut ids = Vec::new();
    if let Ok(entries) = std::fs::read_dir(&state.base_dir) {
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if valid_id(&name) && Workspace::open(e.path()).is_ok() {
                ids.push(name);
            }
        }
    }
    ids.sort();
    Ok(Json(ids.into_iter().map(|workspace_id| WorkspaceInfo { workspace_id }).collect()))
}

fn upload_name(q: &HashMap<String, String>, default: &str) -> String {
    q.get("name").cloned().unwrap_or_else(|| default.to_string())
}

async fn upload_iot(
    State(state): State<AppState>,
    Path(ws): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<ocelink_core::workspace::StagedFile>)> {
    let name = upload_name(&q, "upload.csv");
    let staged = with_ws(state, ws, move |w| pipeline::stage(w, &body, &name)).await?;
    Ok((StatusCode::CREATED, Json(staged)))
}

async fn infer_mapping(
    State(state): State<AppState>,
    Path((ws, hash)): Path<(String, String)>,
) -> ApiResult<Json<ocelink_core::iot::MappingSuggestion>> {
    with_ws(state, ws, move |w| pipeline::infer(w, &hash)).await.map(Json)
}

async fn normalize(
    State(state): State<AppState>,
    Path((ws, hash)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<pipeline::NormalizeOutcome>> {
    let mapping: ocelink_core::ColumnMapping = parse_json(&body)?;
    with_ws(state, ws, move |w| pipeline::normalize_upload(w, &hash, &mapping)).await.map(Json)
}

async fn summary(State(state): State<AppState>, Path(ws): Path<String>) -> ApiResult<Json<ocelink_core::DeviceSummary>> {
    with_ws(state, ws, pipeline::summary).await.map(Json)
}

async fn upload_ocel(
    State(state): State<AppState>,
    Path(ws): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<pipeline::OcelImport>)> {
    let name = upload_name(&q, "log.sqlite");
    let imported = with_ws(state, ws, move |w| pipeline::import_ocel(w, &body, &name, true)).await?;
    Ok((StatusCode::CREATED, Json(imported)))
}

async fn stats(State(state): State<AppState>, Path(ws): Path<String>) -> ApiResult<Json<ocelink_core::OcelStats>> {
    with_ws(state, ws, pipeline::stats).await.map(Json)
}

async fn dfg(
    State(state): State<AppState>,
    Path(ws): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Vec<ocelink_core::DfgEdge>>> {
    let Some(ty) = q.get("object_type").cloned() else {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", "object_type is required")
            .with_field("object_type"));
    };
    with_ws(state, ws, move |w| pipeline::dfg(w, &ty)).await.map(Json)
}

async fn violations(State(state): State<AppState>, Path(ws): Path<String>) -> ApiResult<Json<Vec<ocelink_core::Violation>>> {
    with_ws(state, ws, pipeline::validate).await.map(Json)
}

async fn download(
    State(state): State<AppState>,
    Path(ws): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let (bytes, hash) = with_ws(state, ws, pipeline::download_ocel).await?;
    if let Some(token) = q.get("token") {
        if token != &hash {
            return Err(ApiError::new(StatusCode::CONFLICT, "stale_token", "the store changed since the token was issued")
                .with_field("token"));
        }
    }
    Ok((
        [
            (header::CONTENT_TYPE, "application/vnd.sqlite3".to_string()),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"ocel.sqlite\"".to_string()),
            (header::HeaderName::from_static(CONTENT_HASH_HEADER), hash),
        ],
        bytes,
    )
        .into_response())
}

async fn create_plan(
    State(state): State<AppState>,
    Path(ws): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<ocelink_core::EnrichmentPlan>)> {
    let spec: IntegrationSpec = parse_json(&body)?;
    let limit = match q.get("preview") {
        Some(v) => v.parse().map_err(|_| {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", "preview must be a count").with_field("preview")
        })?,
        None => DEFAULT_PREVIEW_LIMIT,
    };
    let plan = with_ws(state, ws, move |w| pipeline::plan(w, &spec, limit)).await?;
    Ok((StatusCode::CREATED, Json(plan)))
}

async fn list_plans(State(state): State<AppState>, Path(ws): Path<String>) -> ApiResult<Json<Vec<ocelink_core::EnrichmentPlan>>> {
    with_ws(state, ws, pipeline::list_plans).await.map(Json)
}

async fn get_plan(
    State(state): State<AppState>,
    Path((ws, id)): Path<(String, String)>,
) -> ApiResult<Json<ocelink_core::EnrichmentPlan>> {
    with_ws(state, ws, move |w| pipeline::load_plan(w, &id)).await.map(Json)
}

/// Result of an execution; `download_token` is the new store hash.
#[derive(Debug, Serialize, Deserialize)]
struct Executed {
    job_id: String,
    status: ocelink_core::workspace::JobStatus,
    report: ocelink_core::EnrichmentReport,
    download_token: String,
}

async fn execute_plan(State(state): State<AppState>, Path((ws, id)): Path<(String, String)>) -> ApiResult<Json<Executed>> {
    let opts = ApplyOptions { no_wait: true, ..Default::default() };
    let out = with_ws(state, ws, move |w| pipeline::execute_plan(w, &id, &opts)).await?;
    Ok(Json(Executed {
        job_id: out.job_id,
        status: ocelink_core::workspace::JobStatus::Done,
        report: out.report,
        download_token: out.store_hash_after,
    }))
}

async fn list_jobs(State(state): State<AppState>, Path(ws): Path<String>) -> ApiResult<Json<Vec<ocelink_core::workspace::JobRecord>>> {
    with_ws(state, ws, |w| Ok(w.ledger().jobs()?)).await.map(Json)
}

async fn get_job(
    State(state): State<AppState>,
    Path((ws, id)): Path<(String, String)>,
) -> ApiResult<Json<ocelink_core::workspace::JobRecord>> {
    with_ws(state, ws, move |w| w.ledger().job(&id)?.ok_or_else(|| Error::NotFound(format!("job {id:?}"))))
        .await
        .map(Json)
}

async fn ledger(State(state): State<AppState>, Path(ws): Path<String>) -> ApiResult<Json<Vec<ocelink_core::workspace::JobRecord>>> {
    with_ws(state, ws, |w| Ok(w.ledger().entries()?)).await.map(Json)
}
