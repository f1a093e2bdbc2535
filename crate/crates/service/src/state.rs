//! Process-wide service state: the session registry, token checks and the
//! recovery pass that fills the registry at startup.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::sync::Arc;

use axum::http::{header, HeaderMap};
use gci_core::deliberation::{ParticipantId, Role, SessionId, Viewer};
use gci_core::Session;
use parking_lot::{Mutex, RwLock};
use sha2::{Digest, Sha256};

use crate::store::{RecoveryError, StoredSession};
use crate::{ApiError, ServiceConfig, ServiceError};

pub const SESSIONS_DIR: &str = "sessions";

/// A registered session: live, or held back because its log failed
/// verification.
#[derive(Debug)]
pub enum Slot {
    Live(Box<tokio::sync::Mutex<StoredSession>>),
    Quarantined { reason: String },
}

/// Shared, cheaply clonable handle to the running service.
#[derive(Debug, Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<SessionId, Arc<Slot>>>,
    /// Requests per credential hash.
    requests: Mutex<HashMap<String, u64>>,
}

/// The authenticated caller of a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caller {
    pub id: ParticipantId,
    pub role: Role,
}

impl Caller {
    pub fn viewer(&self) -> Viewer {
        match self.role {
            Role::Facilitator => Viewer::Facilitator(self.id.clone()),
            Role::Contributor => Viewer::Contributor(self.id.clone()),
        }
    }

    pub fn require_facilitator(&self) -> Result<(), ApiError> {
        match self.role {
            Role::Facilitator => Ok(()),
            Role::Contributor => Err(ApiError::forbidden()),
        }
    }
}

/// SHA-256 of the session id, a zero byte and the bearer credential, hex
/// encoded. Only this hash is ever stored.
pub fn credential_hash(session: &SessionId, credential: &str) -> String {
    let mut h = Sha256::new();
    h.update(session.as_str().as_bytes());
    h.update([0]);
    h.update(credential.as_bytes());
    hex::encode(h.finalize())
}

impl AppState {
    /// Loads every session under `<data_dir>/sessions`. Sessions whose logs
    /// fail verification or replay are registered as quarantined.
    pub fn recover(config: ServiceConfig) -> Result<Self, ServiceError> {
        let root = config.data_dir.join(SESSIONS_DIR);
        let dir_err = |source| ServiceError::DataDir {
            path: root.clone(),
            source,
        };
        fs::create_dir_all(&root).map_err(dir_err)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&root).map_err(dir_err)? {
            let entry = entry.map_err(dir_err)?;
            if !entry.file_type().map_err(dir_err)?.is_dir() {
                continue;
            }
            let Some(name) = entry.file_name().to_str().map(str::to_owned) else {
                tracing::warn!(path = %entry.path().display(), "skipping non UTF-8 session directory");
                continue;
            };
            let slot = match StoredSession::open(&entry.path()) {
                Ok(stored) if stored.session().id().as_str() == name => {
                    tracing::info!(session = %name, events = stored.session().next_seq(), "session recovered");
                    Slot::Live(Box::new(tokio::sync::Mutex::new(stored)))
                }
                Ok(stored) => quarantine(&name, format!("log belongs to session {}", stored.session().id())),
                Err(RecoveryError::Io(e)) => return Err(dir_err(e)),
                Err(e) => quarantine(&name, e.to_string()),
            };
            sessions.insert(SessionId::new(name), Arc::new(slot));
        }
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                sessions: RwLock::new(sessions),
                requests: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    /// Ids of live sessions, sorted.
    pub fn live_sessions(&self) -> Vec<SessionId> {
        let mut ids: Vec<SessionId> = self
            .inner
            .sessions
            .read()
            .iter()
            .filter(|(_, slot)| matches!(***slot, Slot::Live(_)))
            .map(|(id, _)| id.clone())
            .collect();
        ids.sort();
        ids
    }

    /// Quarantined sessions with the reason each was rejected.
    pub fn quarantined(&self) -> BTreeMap<SessionId, String> {
        self.inner
            .sessions
            .read()
            .iter()
            .filter_map(|(id, slot)| match &**slot {
                Slot::Quarantined { reason } => Some((id.clone(), reason.clone())),
                Slot::Live(_) => None,
            })
            .collect()
    }

    pub(crate) fn slot(&self, id: &SessionId) -> Result<Arc<Slot>, ApiError> {
        self.inner
            .sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(ApiError::unknown_session)
    }

    /// Persists and registers a new session.
    pub(crate) fn insert(&self, session: Session) -> Result<(), ApiError> {
        let id = session.id().clone();
        let dir = self.config().data_dir.join(SESSIONS_DIR).join(id.as_str());
        let stored = StoredSession::create(&dir, session).map_err(|e| {
            tracing::error!(session = %id, error = %e, "cannot store new session");
            ApiError::internal("persistence_failed", "the session could not be stored")
        })?;
        self.inner
            .sessions
            .write()
            .insert(id, Arc::new(Slot::Live(Box::new(tokio::sync::Mutex::new(stored)))));
        Ok(())
    }

    /// Resolves the bearer token against the session's participants and
    /// charges one request to it.
    pub(crate) fn authenticate(&self, session: &Session, headers: &HeaderMap) -> Result<Caller, ApiError> {
        let token = bearer(headers).ok_or_else(ApiError::unauthorized)?;
        let hash = credential_hash(session.id(), token);
        let record = session.find_by_credential(&hash).ok_or_else(ApiError::unauthorized)?;
        self.charge(&hash)?;
        Ok(Caller {
            id: record.id.clone(),
            role: record.role,
        })
    }

    pub(crate) fn charge(&self, credential_hash: &str) -> Result<(), ApiError> {
        let mut requests = self.inner.requests.lock();
        let used = requests.entry(credential_hash.to_owned()).or_insert(0);
        if *used >= self.config().token_request_cap {
            return Err(ApiError::new(
                axum::http::StatusCode::TOO_MANY_REQUESTS,
                "request_cap_exceeded",
                "this token has used up its request allowance",
            ));
        }
        *used += 1;
        Ok(())
    }
}

fn quarantine(name: &str, reason: String) -> Slot {
    tracing::error!(session = %name, %reason, "session quarantined");
    Slot::Quarantined { reason }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    let token = token.trim();
    (scheme.eq_ignore_ascii_case("bearer") && !token.is_empty()).then_some(token)
}
