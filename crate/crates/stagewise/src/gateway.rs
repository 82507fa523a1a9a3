//! HTTP JSON API over the orchestrator.
//!
//! Provider-backed calls (scope, navigator turn, executor brief) claim the
//! campaign's in-flight slot before responding, run on the blocking pool and
//! answer `202` with a ticket that is polled at `/turns/{ticket}`. Everything
//! else is answered synchronously.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stagewise_core::labdata::{dataset_summary, Vocabulary};
use stagewise_core::scope::ScopeRequest;
use stagewise_core::{Blueprint, Campaign, CampaignId, Exemplar, Phase, RubricScore};

use crate::engine::{iteration_report, rubric_report, EngineError, Orchestrator};
use crate::store::StoreError;
use crate::tables::read_screening_file;

#[derive(Debug, Clone, Default)]
pub struct GatewayConfig {
    /// Screening CSV served by `/screening/summary`.
    pub screening: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum TicketState {
    Pending,
    Done { result: Value },
    Failed { status: u16, error: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct Ticket {
    pub ticket: u64,
    pub campaign: CampaignId,
    pub phase: Phase,
    #[serde(flatten)]
    pub state: TicketState,
}

struct AppState {
    orch: Arc<Orchestrator>,
    config: GatewayConfig,
    tickets: Mutex<HashMap<u64, Ticket>>,
    next_ticket: AtomicU64,
}

pub fn router(orch: Arc<Orchestrator>, config: GatewayConfig) -> Router {
    let state = Arc::new(AppState {
        orch,
        config,
        tickets: Mutex::new(HashMap::new()),
        next_ticket: AtomicU64::new(1),
    });
    Router::new()
        .route("/campaigns", post(create_campaign).get(list_campaigns))
        .route("/campaigns/{id}", get(show_campaign))
        .route("/campaigns/{id}/blueprint", post(blueprint))
        .route("/campaigns/{id}/turns", post(run_turn))
        .route("/campaigns/{id}/turns/current", get(current_turn))
        .route("/campaigns/{id}/choice", post(choose))
        .route("/campaigns/{id}/brief", post(brief))
        .route("/campaigns/{id}/report", post(fill_report))
        .route("/campaigns/{id}/feedback", post(feedback))
        .route("/campaigns/{id}/events", get(events))
        .route("/turns/{ticket}", get(ticket))
        .route("/scores", post(scores))
        .route("/reports/rubric", get(rubric))
        .route("/reports/iterations", get(iterations))
        .route("/screening/summary", get(screening))
        .with_state(state)
}

pub async fn serve(orch: Arc<Orchestrator>, config: GatewayConfig, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    axum::serve(listener, router(orch, config)).await
}

pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        Self(StatusCode::BAD_REQUEST, msg.into())
    }

    fn not_found(msg: impl Into<String>) -> Self {
        Self(StatusCode::NOT_FOUND, msg.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn status_of(e: &EngineError) -> StatusCode {
    match e {
        EngineError::Store(StoreError::NoSuchCampaign(_)) => StatusCode::NOT_FOUND,
        e if e.is_conflict() => StatusCode::CONFLICT,
        EngineError::Provider(_) => StatusCode::BAD_GATEWAY,
        EngineError::Scope(_) | EngineError::Navigator(_) | EngineError::Executor(_) => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        Self(status_of(&e), e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        EngineError::from(e).into()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_id(id: &str) -> ApiResult<CampaignId> {
    CampaignId::new(id).map_err(|e| ApiError::not_found(e.to_string()))
}

fn view(c: &Campaign) -> Value {
    let mut v = serde_json::to_value(c).expect("campaign serializes");
    v["state_hash"] = Value::String(c.state_hash());
    v
}

/// Claims the campaign's provider slot now, then runs `work` on the
/// blocking pool and records its outcome under a ticket.
fn spawn_ticket<T, F>(st: &Arc<AppState>, id: CampaignId, phase: Phase, work: F) -> ApiResult<Response>
where
    T: Serialize,
    F: FnOnce(&Orchestrator, &CampaignId) -> Result<T, EngineError> + Send + 'static,
{
    st.orch.precheck(&id, phase)?;
    let slot = st.orch.reserve(&id)?;
    let n = st.next_ticket.fetch_add(1, Ordering::Relaxed);
    let pending = Ticket { ticket: n, campaign: id.clone(), phase, state: TicketState::Pending };
    st.tickets.lock().expect("ticket table poisoned").insert(n, pending.clone());
    let st2 = st.clone();
    tokio::task::spawn_blocking(move || {
        let state = match work(&st2.orch, &id) {
            Ok(v) => TicketState::Done { result: serde_json::to_value(v).expect("result serializes") },
            Err(e) => TicketState::Failed { status: status_of(&e).as_u16(), error: e.to_string() },
        };
        drop(slot);
        if let Some(t) = st2.tickets.lock().expect("ticket table poisoned").get_mut(&n) {
            t.state = state;
        }
    });
    Ok((StatusCode::ACCEPTED, Json(pending)).into_response())
}

#[derive(Deserialize)]
struct NewCampaign {
    #[serde(default)]
    id: Option<String>,
    subject: String,
    stage_count: u32,
    #[serde(default)]
    exemplar: Option<Exemplar>,
}

async fn create_campaign(State(st): State<Arc<AppState>>, Json(body): Json<NewCampaign>) -> ApiResult<Response> {
    let id = match body.id {
        Some(id) => CampaignId::new(id).map_err(|e| ApiError::bad_request(e.to_string()))?,
        None => st.orch.store().fresh_id(&body.subject)?,
    };
    let c = st.orch.create_campaign(id, body.subject, body.stage_count, body.exemplar).map_err(|e| match e {
        EngineError::Store(StoreError::IllegalTransition(t)) => ApiError::bad_request(t.to_string()),
        e => e.into(),
    })?;
    Ok((StatusCode::CREATED, Json(view(&c))).into_response())
}

async fn list_campaigns(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let mut out = Vec::new();
    for id in st.orch.store().list()? {
        let c = st.orch.store().snapshot(&id)?;
        out.push(json!({
            "id": id,
            "subject": c.subject(),
            "status": c.status(),
            "cursor": c.cursor(),
            "last_seq": c.last_seq(),
        }));
    }
    Ok(Json(Value::Array(out)))
}

async fn show_campaign(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(view(&st.orch.store().snapshot(&parse_id(&id)?)?)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BlueprintBody {
    Direct { blueprint: Blueprint },
    Scope(ScopeRequest),
}

async fn blueprint(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<BlueprintBody>,
) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    match body {
        BlueprintBody::Direct { blueprint } => {
            let c = st.orch.set_blueprint(&id, blueprint)?;
            Ok(Json(view(&c)).into_response())
        }
        BlueprintBody::Scope(req) => spawn_ticket(&st, id, Phase::Scope, move |o, id| {
            o.scope_reserved(id, &req).map(|c| view(&c))
        }),
    }
}

async fn run_turn(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    spawn_ticket(&st, parse_id(&id)?, Phase::Navigator, |o, id| o.run_turn_reserved(id))
}

async fn current_turn(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let c = st.orch.store().snapshot(&parse_id(&id)?)?;
    let turn = c.current_turn().ok_or_else(|| ApiError::not_found("no turn has been parsed yet"))?;
    Ok(Json(json!({
        "turn": turn,
        "cursor": c.cursor(),
        "loop_state": c.loop_state(),
        "status": c.status(),
    })))
}

#[derive(Deserialize)]
struct ChoiceBody {
    index: u8,
}

async fn choose(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<ChoiceBody>,
) -> ApiResult<Json<Value>> {
    if !(1..=3).contains(&body.index) {
        return Err(ApiError::bad_request("index must be 1, 2 or 3"));
    }
    Ok(Json(view(&st.orch.choose(&parse_id(&id)?, body.index)?)))
}

async fn brief(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    spawn_ticket(&st, parse_id(&id)?, Phase::Executor, |o, id| o.brief_reserved(id))
}

#[derive(Deserialize)]
struct ReportBody {
    values: std::collections::BTreeMap<String, String>,
}

async fn fill_report(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<ReportBody>,
) -> ApiResult<Json<Value>> {
    let text = st.orch.fill_report(&parse_id(&id)?, &body.values)?;
    Ok(Json(json!({ "text": text })))
}

#[derive(Deserialize)]
struct FeedbackBody {
    text: String,
}

async fn feedback(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<FeedbackBody>,
) -> ApiResult<Json<Value>> {
    let id = parse_id(&id)?;
    let outcome = st.orch.feedback(&id, body.text)?;
    let c = st.orch.store().snapshot(&id)?;
    Ok(Json(json!({ "advance": outcome.advance, "status": outcome.status, "cursor": c.cursor() })))
}

#[derive(Deserialize)]
struct EventsQuery {
    from: Option<u64>,
}

async fn events(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> ApiResult<Json<Value>> {
    let from = q.from.unwrap_or(1);
    let events: Vec<_> = st.orch.store().events(&parse_id(&id)?)?.into_iter().filter(|e| e.seq >= from).collect();
    Ok(Json(serde_json::to_value(events).expect("events serialize")))
}

async fn ticket(State(st): State<Arc<AppState>>, Path(n): Path<u64>) -> ApiResult<Json<Ticket>> {
    let tickets = st.tickets.lock().expect("ticket table poisoned");
    tickets.get(&n).cloned().map(Json).ok_or_else(|| ApiError::not_found(format!("no ticket {n}")))
}

#[derive(Deserialize)]
struct ScoresBody {
    scores: Vec<RubricScore>,
    #[serde(default)]
    overwrite: bool,
}

async fn scores(State(st): State<Arc<AppState>>, Json(body): Json<ScoresBody>) -> ApiResult<Json<Value>> {
    let mut recorded = 0;
    for s in body.scores {
        st.orch.score(s, body.overwrite).map_err(|e| match e {
            EngineError::Store(StoreError::IllegalTransition(t)) => ApiError(StatusCode::CONFLICT, t.to_string()),
            e => e.into(),
        })?;
        recorded += 1;
    }
    Ok(Json(json!({ "recorded": recorded })))
}

#[derive(Deserialize)]
struct RubricQuery {
    campaign: String,
}

async fn rubric(State(st): State<Arc<AppState>>, Query(q): Query<RubricQuery>) -> ApiResult<Json<Value>> {
    let c = st.orch.store().snapshot(&parse_id(&q.campaign)?)?;
    let report = rubric_report(&c).map_err(|e| ApiError(StatusCode::CONFLICT, e.to_string()))?;
    let table = report.render_table();
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["table"] = Value::String(table);
    Ok(Json(v))
}

async fn iterations(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let rows = iteration_report(st.orch.store())?;
    let table = stagewise_core::labdata::render_iteration_table(&rows);
    Ok(Json(json!({ "campaigns": rows, "table": table })))
}

async fn screening(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let path = st.config.screening.clone().ok_or_else(|| ApiError::not_found("no screening table configured"))?;
    let records = read_screening_file(&path, &Vocabulary::default())
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let summary = dataset_summary(&records).map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let table = summary.render_table();
    let mut v = serde_json::to_value(summary).expect("summary serializes");
    v["table"] = Value::String(table);
    Ok(Json(v))
}
