//! HTTP service for working through the warning queue of an evaluation run.
//!
//! Readers share the session; every mutation takes the single write lock, is
//! appended (and synced) to the annotation log, and only then acknowledged.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;
use tower_http::services::ServeDir;

use tqh::rules::test_pattern;
use tqh::{Decision, Polarity, Rule, RuleKind, Scope};

mod session;

pub use session::{Page, Report, ReportCell, ReportRow, RuleView, Session, SessionError, TriageItem, DEFAULT_LOG};

pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 1000;

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Rebuild stale tables on report reads instead of answering 409.
    pub auto_recompute: bool,
    /// Directory holding the triage UI bundle.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            auto_recompute: true,
            ui_dir: None,
        }
    }
}

/// Shared handle to the (possibly absent) session.
#[derive(Clone, Default)]
pub struct AppState {
    session: Arc<RwLock<Option<Session>>>,
    auto_recompute: bool,
}

impl AppState {
    pub fn new(session: Option<Session>, auto_recompute: bool) -> Self {
        AppState {
            session: Arc::new(RwLock::new(session)),
            auto_recompute,
        }
    }

    pub async fn fingerprint(&self) -> Option<u64> {
        self.session.read().await.as_ref().map(Session::fingerprint)
    }

    pub async fn load(&self, session: Session) {
        *self.session.write().await = Some(session);
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn err(status: StatusCode, message: impl Into<String>) -> ApiError {
    ApiError(status, message.into())
}

fn no_run() -> ApiError {
    err(StatusCode::CONFLICT, "no run loaded")
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::UnknownItem(_) | SessionError::UnknownCell(..) => StatusCode::NOT_FOUND,
            SessionError::NotAWarning(..) => StatusCode::CONFLICT,
            SessionError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Core(tqh::Error::Io { .. }) => StatusCode::INTERNAL_SERVER_ERROR,
            SessionError::Core(tqh::Error::UnknownItem(_)) => StatusCode::NOT_FOUND,
            SessionError::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_usize(params: &HashMap<String, String>, key: &str, default: usize) -> ApiResult<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| err(StatusCode::BAD_REQUEST, format!("`{key}` must be a non-negative integer"))),
    }
}

async fn warnings(State(app): State<AppState>, Query(params): Query<HashMap<String, String>>) -> ApiResult<Json<Page>> {
    let offset = parse_usize(&params, "offset", 0)?;
    let limit = parse_usize(&params, "limit", DEFAULT_LIMIT)?;
    if limit == 0 || limit > MAX_LIMIT {
        return Err(err(StatusCode::BAD_REQUEST, format!("`limit` must be between 1 and {MAX_LIMIT}")));
    }
    let guard = app.session.read().await;
    let session = guard.as_ref().ok_or_else(no_run)?;
    Ok(Json(session.warnings(offset, limit)))
}

#[derive(Deserialize)]
struct VerdictBody {
    decision: String,
    #[serde(default)]
    annotator: String,
    note: Option<String>,
    idempotency_key: Option<String>,
}

async fn verdict(
    State(app): State<AppState>,
    Path((item, system)): Path<(String, String)>,
    Json(body): Json<VerdictBody>,
) -> ApiResult<Response> {
    let mut guard = app.session.write().await;
    let session = guard.as_mut().ok_or_else(no_run)?;
    if session.effective().item_index(&item).is_none() || session.effective().system_index(&system).is_none() {
        return Err(SessionError::UnknownCell(item, system).into());
    }
    let decision: Decision = body
        .decision
        .parse()
        .map_err(|e: tqh::Error| err(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let (record, created) =
        session.resolve(&item, &system, decision, &body.annotator, body.note, body.idempotency_key)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    let body = json!({
        "record": record,
        "warnings_remaining": session.warnings_remaining(),
        "stale": session.is_stale(),
    });
    Ok((status, Json(body)).into_response())
}

#[derive(Deserialize)]
struct RuleBody {
    polarity: Polarity,
    #[serde(default = "regex_kind")]
    kind: RuleKind,
    pattern: String,
    #[serde(default)]
    case_insensitive: bool,
    #[serde(default)]
    annotator: String,
    idempotency_key: Option<String>,
}

fn regex_kind() -> RuleKind {
    RuleKind::Regex
}

async fn add_rule(
    State(app): State<AppState>,
    Path(item): Path<String>,
    Json(body): Json<RuleBody>,
) -> ApiResult<Response> {
    let mut guard = app.session.write().await;
    let session = guard.as_mut().ok_or_else(no_run)?;
    let rule = Rule {
        polarity: body.polarity,
        kind: body.kind,
        pattern: body.pattern,
        case_insensitive: body.case_insensitive,
    };
    let (refinement, diff, created) = session.refine(&item, rule, &body.annotator, body.idempotency_key)?;
    let diff: Vec<Value> = diff
        .iter()
        .map(|c| {
            json!({
                "item_id": c.item_id,
                "system_name": c.system_name,
                "before": c.before,
                "after": c.after,
                "new_contradiction": c.is_new_contradiction(),
            })
        })
        .collect();
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    let body = json!({
        "refinement": refinement,
        "diff": diff,
        "warnings_remaining": session.warnings_remaining(),
        "stale": session.is_stale(),
    });
    Ok((status, Json(body)).into_response())
}

#[derive(Deserialize)]
struct RuleTestBody {
    pattern: String,
    #[serde(default)]
    case_insensitive: bool,
    #[serde(default)]
    sample_texts: Vec<String>,
}

async fn test_rule(Json(body): Json<RuleTestBody>) -> ApiResult<Json<Value>> {
    let spans = test_pattern(&body.pattern, body.case_insensitive, &body.sample_texts)
        .map_err(|e| err(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let results: Vec<Value> = body
        .sample_texts
        .iter()
        .zip(spans)
        .map(|(text, spans)| json!({ "text": text, "spans": spans }))
        .collect();
    Ok(Json(json!({ "results": results })))
}

async fn report(State(app): State<AppState>, Query(params): Query<HashMap<String, String>>) -> ApiResult<Json<Report>> {
    let scope: Scope = match params.get("scope") {
        None => Scope::Category,
        Some(s) => s.parse().map_err(|e: tqh::Error| err(StatusCode::BAD_REQUEST, e.to_string()))?,
    };
    {
        let guard = app.session.read().await;
        let session = guard.as_ref().ok_or_else(no_run)?;
        if !session.is_stale() {
            return Ok(Json(session.report(scope)?));
        }
        if !app.auto_recompute {
            return Err(err(StatusCode::CONFLICT, "tables are stale; POST /api/recompute first"));
        }
    }
    let mut guard = app.session.write().await;
    let session = guard.as_mut().ok_or_else(no_run)?;
    if session.is_stale() {
        session.recompute()?;
    }
    Ok(Json(session.report(scope)?))
}

async fn recompute(State(app): State<AppState>) -> ApiResult<Json<Value>> {
    let mut guard = app.session.write().await;
    let session = guard.as_mut().ok_or_else(no_run)?;
    session.recompute()?;
    Ok(Json(json!({ "stale": false, "warning_rate": session.run().warning_rate() })))
}

const PLACEHOLDER: &str = "<!doctype html><title>tqh triage</title>\
<p>No UI bundle configured. The API lives under <code>/api</code>.</p>";

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/warnings", get(warnings))
        .route("/api/warnings/{item}/{system}/verdict", post(verdict))
        .route("/api/items/{item}/rules", post(add_rule))
        .route("/api/rules/test", post(test_rule))
        .route("/api/report", get(report))
        .route("/api/recompute", post(recompute))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

pub fn app(session: Option<Session>, options: ServiceOptions) -> (Router, AppState) {
    let state = AppState::new(session, options.auto_recompute);
    (router(state.clone(), options.ui_dir), state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, session: Session, options: ServiceOptions) -> std::io::Result<()> {
    let (router, _) = app(Some(session), options);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router).await
}
