use std::io;
use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gci_core::DeliberationError;
use serde::Serialize;
use thiserror::Error;

/// Startup and configuration failures.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data directory {}: {source}", path.display())]
    DataDir { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An error response: a status code and a `{code, message}` body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn unauthorized() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or unknown bearer token",
        )
    }

    pub fn forbidden() -> Self {
        Self::new(
            StatusCode::FORBIDDEN,
            "facilitator_only",
            "this action needs the facilitator token",
        )
    }

    pub fn unknown_session() -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", "no such session")
    }

    pub fn quarantined(reason: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "session_quarantined",
            format!("session log failed verification and is read-only: {reason}"),
        )
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed_body", message)
    }

    pub fn internal(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, code, message)
    }
}

impl From<DeliberationError> for ApiError {
    fn from(e: DeliberationError) -> Self {
        use DeliberationError as E;
        let status = match &e {
            E::Phase { .. }
            | E::InvalidTransition { .. }
            | E::DuplicateIdea
            | E::ParticipantExists
            | E::UnassignedPair
            | E::DuplicateJudgment
            | E::RankingUnavailable => StatusCode::CONFLICT,
            E::UnknownItem(_) | E::UnknownParticipant => StatusCode::NOT_FOUND,
            E::EmptyText
            | E::DegenerateJudgment
            | E::InvalidDecision(_)
            | E::InconsistentCandidates(_)
            | E::InvalidConfig(_)
            | E::Judgment(_) => StatusCode::UNPROCESSABLE_ENTITY,
            E::MissingSessionCreated | E::Replay { .. } | E::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
