//! HTTP routes.
//!
//! Every mutating route runs its command through
//! [`StoredSession::execute`](crate::store::StoredSession::execute), which
//! makes the resulting event durable before the handler answers, and every
//! session response is serialized by [`reply`].

use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gci_core::deliberation::{DecisionInput, ParticipantId, Phase, SessionId, TaskOutcome, Viewer};
use gci_core::{rng, ItemId, Session, SessionConfig};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::MutexGuard;

use crate::mask::reply;
use crate::state::{credential_hash, AppState, Caller, Slot};
use crate::store::StoredSession;
use crate::ApiError;

/// Every route the service answers, as (method, path template).
pub const ROUTES: &[(&str, &str)] = &[
    ("GET", "/health"),
    ("POST", "/sessions"),
    ("POST", "/sessions/{id}/participants"),
    ("GET", "/sessions/{id}/me"),
    ("POST", "/sessions/{id}/ideas"),
    ("GET", "/sessions/{id}/task"),
    ("POST", "/sessions/{id}/judgments"),
    ("GET", "/sessions/{id}/voice"),
    ("GET", "/sessions/{id}/contributions"),
    ("GET", "/sessions/{id}/log"),
    ("POST", "/sessions/{id}/decision-matrix"),
    ("POST", "/sessions/{id}/phase"),
    ("GET", "/sessions/{id}/state"),
];

/// Response header carrying the reason for a `204` from `GET /task`.
pub const SIGNAL_HEADER: &str = "gci-signal";

/// Disagreement level from which a pair is listed as a tension.
pub const TENSION_THRESHOLD: f64 = 0.5;

const MIN_CREDENTIAL_LEN: usize = 16;
const MAX_CREDENTIAL_LEN: usize = 512;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/participants", post(join))
        .route("/sessions/{id}/me", get(me))
        .route("/sessions/{id}/ideas", post(submit_idea))
        .route("/sessions/{id}/task", get(task))
        .route("/sessions/{id}/judgments", post(judge))
        .route("/sessions/{id}/voice", get(voice))
        .route("/sessions/{id}/contributions", get(contributions))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/decision-matrix", post(decision_matrix))
        .route("/sessions/{id}/phase", post(change_phase))
        .route("/sessions/{id}/state", get(state_summary))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no_route", "no such route") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(
                StatusCode::METHOD_NOT_ALLOWED,
                "method_not_allowed",
                "method not allowed on this route",
            )
        })
        .with_state(state)
}

// ---- wire types -------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CreateSessionBody {
    config: SessionConfig,
    credential: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct JoinBody {
    credential: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdeaBody {
    text: String,
    #[serde(default)]
    parent: Option<ItemId>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgmentBody {
    winner: ItemId,
    loser: ItemId,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseBody {
    to: Phase,
}

#[derive(Debug, Serialize)]
struct SessionCreated<'a> {
    session_id: &'a SessionId,
    participant_id: &'a ParticipantId,
    alias: &'a str,
    token: &'a str,
}

#[derive(Debug, Serialize)]
struct Joined<'a> {
    participant_id: &'a ParticipantId,
    alias: &'a str,
    token: &'a str,
}

#[derive(Debug, Serialize)]
struct IdeaCreated {
    item: ItemId,
}

#[derive(Debug, Serialize)]
struct PhaseView {
    phase: Phase,
}

#[derive(Debug, Serialize)]
struct StateView<'a> {
    session_id: &'a SessionId,
    phase: Phase,
    seq: u64,
    head_hash: &'a str,
    state_hash: String,
    judgments: u64,
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    sessions: usize,
    quarantined: BTreeMap<SessionId, String>,
}

// ---- helpers ------------------------------------------------------------------

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(e.to_string()))
}

/// Like [`parse`], but an empty body means the default value.
fn parse_or_default<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse(body)
    }
}

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::rng().fill(&mut buf[..]);
    hex::encode(buf)
}

/// A client-chosen credential, or a fresh random one.
fn credential(supplied: Option<String>) -> Result<String, ApiError> {
    let Some(c) = supplied else {
        return Ok(random_hex(32));
    };
    let valid = (MIN_CREDENTIAL_LEN..=MAX_CREDENTIAL_LEN).contains(&c.len()) && c.bytes().all(|b| b.is_ascii_graphic());
    if valid {
        Ok(c)
    } else {
        Err(ApiError::malformed(format!(
            "credential must be {MIN_CREDENTIAL_LEN}-{MAX_CREDENTIAL_LEN} printable ASCII characters"
        )))
    }
}

async fn lock<'a>(slot: &'a Slot) -> Result<MutexGuard<'a, StoredSession>, ApiError> {
    match slot {
        Slot::Live(cell) => Ok(cell.lock().await),
        Slot::Quarantined { reason } => Err(ApiError::quarantined(reason)),
    }
}

fn signal(value: &'static str) -> Response {
    let mut response = StatusCode::NO_CONTENT.into_response();
    response
        .headers_mut()
        .insert(HeaderName::from_static(SIGNAL_HEADER), HeaderValue::from_static(value));
    response
}

// ---- handlers -------------------------------------------------------------------

async fn health(State(app): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok",
        sessions: app.live_sessions().len(),
        quarantined: app.quarantined(),
    })
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let body: CreateSessionBody = parse_or_default(&body)?;
    let token = credential(body.credential)?;
    let id = SessionId::new(format!("s-{}", random_hex(12)));
    let facilitator = ParticipantId::new(format!("p-{}", random_hex(12)));
    let hash = credential_hash(&id, &token);
    let session = Session::create(id.clone(), body.config, facilitator.clone(), Some(hash))?;
    let viewer = Viewer::Facilitator(facilitator.clone());
    let alias = session
        .participant(&facilitator)
        .expect("creator is a participant")
        .alias
        .clone();
    let response = reply(
        &session,
        &viewer,
        StatusCode::CREATED,
        &SessionCreated {
            session_id: &id,
            participant_id: &facilitator,
            alias: &alias,
            token: &token,
        },
    )?;
    app.insert(session)?;
    tracing::info!(session = %id, "session created");
    Ok(response)
}

async fn join(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let mut stored = lock(&slot).await?;
    let body: JoinBody = parse_or_default(&body)?;
    let token = credential(body.credential)?;
    let hash = credential_hash(stored.session().id(), &token);
    app.charge(&hash)?;
    let (record, status) = match stored.session().find_by_credential(&hash) {
        Some(existing) => (existing.clone(), StatusCode::OK),
        None => {
            let pid = ParticipantId::new(format!("p-{}", random_hex(12)));
            let snapshot_every = app.config().snapshot_every;
            let record = stored.execute(snapshot_every, |s| s.join(pid, Some(hash)))?;
            (record, StatusCode::CREATED)
        }
    };
    let caller = Caller {
        id: record.id.clone(),
        role: record.role,
    };
    reply(
        stored.session(),
        &caller.viewer(),
        status,
        &Joined {
            participant_id: &record.id,
            alias: &record.alias,
            token: &token,
        },
    )
}

async fn me(State(app): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    let view = stored.session().participant_view(&caller.id)?;
    reply(stored.session(), &caller.viewer(), StatusCode::OK, &view)
}

async fn submit_idea(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let mut stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    let body: IdeaBody = parse(&body)?;
    let item = stored.execute(app.config().snapshot_every, |s| {
        s.submit_idea(&caller.id, &body.text, body.parent)
    })?;
    reply(
        stored.session(),
        &caller.viewer(),
        StatusCode::CREATED,
        &IdeaCreated { item },
    )
}

async fn task(State(app): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let mut stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    match stored.session().phase() {
        Phase::Reviewing => {}
        Phase::Collecting => return Ok(signal("collecting")),
        Phase::Converged => return Ok(signal("converged")),
        Phase::Revealed => return Ok(signal("revealed")),
    }
    let session = stored.session();
    let seed = rng::child_seed(session.config().seed, &[b"task", &session.next_seq().to_le_bytes()]);
    let outcome = stored.execute(app.config().snapshot_every, |s| s.next_task(&caller.id, seed))?;
    match outcome {
        TaskOutcome::Assigned(a) => {
            let view = stored.session().task_view(&a);
            reply(stored.session(), &caller.viewer(), StatusCode::OK, &view)
        }
        TaskOutcome::NoEligiblePairs => Ok(signal("no_eligible_pairs")),
        TaskOutcome::AwaitingConvergence => Ok(signal("awaiting_convergence")),
    }
}

async fn judge(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let mut stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    let body: JudgmentBody = parse(&body)?;
    stored.execute(app.config().snapshot_every, |s| {
        s.record_judgment(&caller.id, &body.winner, &body.loser)
    })?;
    let view = stored.session().contributor_voice();
    reply(stored.session(), &caller.viewer(), StatusCode::OK, &view)
}

async fn voice(
    State(app): State<AppState>,
    Path(id): Path<String>,
    RawQuery(query): RawQuery,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    let session = stored.session();
    match query.as_deref().unwrap_or("") {
        "" | "view=contributor" => reply(session, &caller.viewer(), StatusCode::OK, &session.contributor_voice()),
        "view=facilitator" => {
            caller.require_facilitator()?;
            reply(
                session,
                &caller.viewer(),
                StatusCode::OK,
                &session.facilitator_voice(TENSION_THRESHOLD),
            )
        }
        other => Err(ApiError::malformed(format!(
            "unsupported query {other:?}; use view=facilitator"
        ))),
    }
}

async fn contributions(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    caller.require_facilitator()?;
    let ranking = stored.session().contribution_ranking()?;
    reply(stored.session(), &caller.viewer(), StatusCode::OK, &ranking)
}

async fn log(State(app): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    caller.require_facilitator()?;
    let body = stored.session().log().to_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/jsonl")], body).into_response())
}

async fn decision_matrix(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let mut stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    caller.require_facilitator()?;
    let input: DecisionInput = parse(&body)?;
    let matrix = stored.execute(app.config().snapshot_every, |s| s.record_decision(input))?;
    reply(stored.session(), &caller.viewer(), StatusCode::OK, &matrix)
}

async fn change_phase(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let mut stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    caller.require_facilitator()?;
    let body: PhaseBody = parse(&body)?;
    stored.execute(app.config().snapshot_every, |s| s.change_phase(body.to))?;
    let phase = stored.session().phase();
    reply(stored.session(), &caller.viewer(), StatusCode::OK, &PhaseView { phase })
}

async fn state_summary(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let slot = app.slot(&SessionId::new(id))?;
    let stored = lock(&slot).await?;
    let caller = app.authenticate(stored.session(), &headers)?;
    caller.require_facilitator()?;
    let s = stored.session();
    let view = StateView {
        session_id: s.id(),
        phase: s.phase(),
        seq: s.next_seq(),
        head_hash: s.head_hash(),
        state_hash: s.state_hash(),
        judgments: s.judgment_count(),
    };
    reply(s, &caller.viewer(), StatusCode::OK, &view)
}
