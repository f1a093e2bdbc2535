//! The single serialization point for session responses.
//!
//! Handlers build typed views; [`reply`] turns them into bytes. Before the
//! revealed phase, a response for a contributor is scanned for the id of
//! every other participant, and any hit is refused instead of sent. Views
//! are already masked by construction; this scan is what keeps a field
//! added later from leaking an identity.

use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use gci_core::deliberation::{Phase, Viewer};
use gci_core::Session;
use serde::Serialize;

use crate::ApiError;

/// Serializes `body` for `viewer`, enforcing contributor masking.
pub fn reply<T: Serialize>(
    session: &Session,
    viewer: &Viewer,
    status: StatusCode,
    body: &T,
) -> Result<Response, ApiError> {
    let bytes = serde_json::to_vec(body).map_err(|e| ApiError::internal("serialization_failed", e.to_string()))?;
    if let Some(leak) = foreign_id_in(session, viewer, &bytes) {
        tracing::error!(session = %session.id(), leaked = %leak, "masked response withheld");
        return Err(ApiError::internal(
            "masking_violation",
            "the response would have exposed another participant",
        ));
    }
    Ok((status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

/// The first participant id, other than the viewer's own, that occurs in
/// `bytes`; `None` for facilitators and once identities are revealed.
pub fn foreign_id_in(session: &Session, viewer: &Viewer, bytes: &[u8]) -> Option<String> {
    let Viewer::Contributor(me) = viewer else {
        return None;
    };
    if session.phase() >= Phase::Revealed {
        return None;
    }
    session
        .participants()
        .filter(|p| &p.id != me)
        .map(|p| p.id.as_str())
        .find(|id| contains(bytes, id.as_bytes()))
        .map(str::to_owned)
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}
