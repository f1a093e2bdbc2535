//! HTTP/JSON service for masked deliberation sessions.
//!
//! Sessions are stored as their hash-chained event logs plus periodic
//! snapshots under `GCI_DATA_DIR`; on startup every log is verified and
//! replayed, and logs that fail are quarantined rather than dropped.
//! Participants authenticate with per-session bearer tokens; responses to
//! contributors pass through one masking choke point ([`mask::reply`]).

pub mod api;
mod config;
mod error;
pub mod mask;
mod state;
pub mod store;

use std::io;

use tokio::net::TcpListener;

pub use api::{router, ROUTES, SIGNAL_HEADER, TENSION_THRESHOLD};
pub use config::{
    ServiceConfig, DEFAULT_BIND_ADDR, DEFAULT_DATA_DIR, DEFAULT_SNAPSHOT_EVERY, DEFAULT_TOKEN_REQUEST_CAP,
};
pub use error::{ApiError, ServiceError};
pub use state::{credential_hash, AppState, Caller, Slot, SESSIONS_DIR};

/// Serves `state` on `listener` until the process receives Ctrl-C.
pub async fn serve(listener: TcpListener, state: AppState) -> io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
