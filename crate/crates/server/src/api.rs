//! Routes. Handlers translate HTTP into engine calls and nothing more.

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, JsonRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use triadtale_core::character::MAX_SOURCE_BYTES;
use triadtale_core::ids::{JobId, ParticipantId, SessionId};
use triadtale_core::{Actor, ChapterIndex, Engine, ExportFormat, Role};

use crate::error::ApiError;
use crate::idempotency::{self, IdempotencyCache};
use crate::view::{JoinView, SessionView, SourceView};

/// Uploads above the source limit still reach the handler so the client
/// gets a `TooLarge` body instead of a bare 413.
const UPLOAD_LIMIT: usize = MAX_SOURCE_BYTES + 6 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub engine: Engine,
}

pub fn router(engine: Engine) -> Router {
    router_with_cache(engine, IdempotencyCache::default())
}

pub fn router_with_cache(engine: Engine, cache: IdempotencyCache) -> Router {
    let sessions = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/scenario", post(select_scenario))
        .route("/sessions/{id}/participants", post(join))
        .route("/sessions/{id}/roles", post(assign_role))
        .route(
            "/sessions/{id}/character/source",
            post(upload_source).layer(DefaultBodyLimit::max(UPLOAD_LIMIT)),
        )
        .route("/sessions/{id}/character/avatar", post(start_avatar))
        .route("/sessions/{id}/character/confirm", post(confirm_character))
        .route("/sessions/{id}/chapters/{n}/input", post(submit_input))
        .route("/sessions/{id}/chapters/{n}/accept", post(accept))
        .route("/sessions/{id}/chapters/{n}/regenerate", post(regenerate))
        .route("/sessions/{id}/close", post(close))
        .route("/sessions/{id}/export", get(export));

    Router::new()
        .merge(sessions)
        .route("/jobs/{job_id}", get(get_job))
        .route("/images/{address}", get(get_image))
        .route("/scenarios", get(list_scenarios))
        .route("/health", get(health))
        .fallback(not_found)
        .layer(axum::middleware::from_fn_with_state(cache, idempotency::layer))
        .with_state(AppState { engine })
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::invalid_request(e.body_text()))
}

/// `Authorization: Bearer <token>` identifies a participant; without it the
/// request speaks for the group at the shared device.
fn actor(engine: &Engine, id: &SessionId, headers: &HeaderMap) -> ApiResult<Actor> {
    let Some(value) = headers.get(header::AUTHORIZATION) else {
        return Ok(Actor::Group);
    };
    let token = value
        .to_str()
        .ok()
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "expected a Bearer token"))?;
    Ok(engine.authenticate(id, token)?)
}

fn chapter(raw: &str) -> ApiResult<ChapterIndex> {
    raw.parse::<u8>()
        .ok()
        .and_then(ChapterIndex::new)
        .ok_or_else(|| ApiError::invalid_request(format!("chapter `{raw}` is outside 1..=4")))
}

fn view(engine: &Engine, id: &SessionId) -> ApiResult<Json<SessionView>> {
    let session = engine.snapshot(id)?;
    Ok(Json(SessionView::new(&session, engine.latest_job(id))))
}

async fn create_session(State(state): State<AppState>) -> ApiResult<impl IntoResponse> {
    let session = state.engine.create_session().await?;
    Ok((StatusCode::CREATED, view(&state.engine, &session.id)?))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<SessionId>) -> ApiResult<Json<SessionView>> {
    view(&state.engine, &id)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioBody {
    scenario_id: String,
}

async fn select_scenario(
    State(state): State<AppState>,
    Path(id): Path<SessionId>,
    headers: HeaderMap,
    payload: Result<Json<ScenarioBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let payload = body(payload)?;
    let actor = actor(&state.engine, &id, &headers)?;
    state.engine.select_scenario(&id, &payload.scenario_id, actor).await?;
    view(&state.engine, &id)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JoinBody {
    display_name: String,
    #[serde(default)]
    is_facilitator: bool,
}

async fn join(
    State(state): State<AppState>,
    Path(id): Path<SessionId>,
    headers: HeaderMap,
    payload: Result<Json<JoinBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let payload = body(payload)?;
    let actor = actor(&state.engine, &id, &headers)?;
    let (participant_id, token) = state
        .engine
        .join(&id, &payload.display_name, payload.is_facilitator, actor)
        .await?;
    let Json(session) = view(&state.engine, &id)?;
    Ok((
        StatusCode::CREATED,
        Json(JoinView {
            participant_id,
            token,
            session,
        }),
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RoleBody {
    participant_id: ParticipantId,
    role: Role,
}

async fn assign_role(
    State(state): State<AppState>,
    Path(id): Path<SessionId>,
    headers: HeaderMap,
    payload: Result<Json<RoleBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let payload = body(payload)?;
    let actor = actor(&state.engine, &id, &headers)?;
    state
        .engine
        .assign_role(&id, &payload.participant_id, payload.role, actor)
        .await?;
    view(&state.engine, &id)
}

/// The raw image is the request body; `Content-Type` names its format.
async fn upload_source(
    State(state): State<AppState>,
    Path(id): Path<SessionId>,
    headers: HeaderMap,
    bytes: Result<Bytes, BytesRejection>,
) -> ApiResult<impl IntoResponse> {
    let actor = actor(&state.engine, &id, &headers)?;
    let bytes = bytes.map_err(|e| match e.status() {
        StatusCode::PAYLOAD_TOO_LARGE => ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "TooLarge",
            format!("source images are limited to {MAX_SOURCE_BYTES} bytes"),
        ),
        _ => ApiError::invalid_request(e.body_text()),
    })?;
    let declared = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok());
    let image = state.engine.ingest_source(&id, &bytes, declared, actor).await?;
    let Json(session) = view(&state.engine, &id)?;
    Ok((StatusCode::CREATED, Json(SourceView { image, session })))
}

async fn start_avatar(
    State(state): State<AppState>,
    Path(id): Path<SessionId>,
    headers: HeaderMap,
) -> ApiResult<impl IntoResponse> {
    let actor = actor(&state.engine, &id, &headers)?;
    let job = state.engine.start_avatar(&id, actor).await?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfirmBody {
    name: String,
}

async fn confirm_character(
    State(state): State<AppState>,
    Path(id): Path<SessionId>,
    headers: HeaderMap,
    payload: Result<Json<ConfirmBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let payload = body(payload)?;
    let actor = actor(&state.engine, &id, &headers)?;
    state.engine.confirm_character(&id, &payload.name, actor).await?;
    view(&state.engine, &id)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InputBody {
    text: String,
}

async fn submit_input(
    State(state): State<AppState>,
    Path((id, n)): Path<(SessionId, String)>,
    headers: HeaderMap,
    payload: Result<Json<InputBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let chapter = chapter(&n)?;
    let payload = body(payload)?;
    let actor = actor(&state.engine, &id, &headers)?;
    let job = state.engine.submit_input(&id, chapter, &payload.text, actor).await?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn accept(
    State(state): State<AppState>,
    Path((id, n)): Path<(SessionId, String)>,
    headers: HeaderMap,
) -> ApiResult<Json<SessionView>> {
    let chapter = chapter(&n)?;
    let actor = actor(&state.engine, &id, &headers)?;
    state.engine.accept(&id, chapter, actor).await?;
    view(&state.engine, &id)
}

async fn regenerate(
    State(state): State<AppState>,
    Path((id, n)): Path<(SessionId, String)>,
    headers: HeaderMap,
) -> ApiResult<impl IntoResponse> {
    let chapter = chapter(&n)?;
    let actor = actor(&state.engine, &id, &headers)?;
    let job = state.engine.regenerate(&id, chapter, actor).await?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn close(
    State(state): State<AppState>,
    Path(id): Path<SessionId>,
    headers: HeaderMap,
) -> ApiResult<Json<SessionView>> {
    let actor = actor(&state.engine, &id, &headers)?;
    state.engine.close(&id, actor).await?;
    view(&state.engine, &id)
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(
    State(state): State<AppState>,
    Path(id): Path<SessionId>,
    Query(query): Query<ExportQuery>,
) -> ApiResult<Response> {
    let format = match query.format.as_deref() {
        None => ExportFormat::Json,
        Some(raw) => raw.parse::<ExportFormat>().map_err(ApiError::invalid_request)?,
    };
    let bytes = state.engine.export(&id, format)?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], bytes).into_response())
}

async fn get_job(State(state): State<AppState>, Path(job_id): Path<JobId>) -> ApiResult<impl IntoResponse> {
    Ok(Json(state.engine.job(&job_id)?))
}

async fn get_image(State(state): State<AppState>, Path(address): Path<String>) -> ApiResult<Response> {
    let (bytes, media_type) = state.engine.image(&address)?;
    Ok((
        [
            (header::CONTENT_TYPE, media_type.mime()),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable"),
        ],
        bytes,
    )
        .into_response())
}

async fn list_scenarios(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.engine.scenarios().iter().cloned().collect::<Vec<_>>())
}

async fn health() -> impl IntoResponse {
    Json(serde_json::json!({"status": "ok"}))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route")
}
