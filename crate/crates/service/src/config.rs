use std::env;
use std::net::SocketAddr;
use std::path::PathBuf;

use crate::ServiceError;

pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "./data";
pub const DEFAULT_SNAPSHOT_EVERY: u64 = 100;
pub const DEFAULT_TOKEN_REQUEST_CAP: u64 = 100_000;

/// Runtime settings, normally read from `GCI_*` environment variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    /// Root of the session store; one subdirectory per session.
    pub data_dir: PathBuf,
    pub bind_addr: SocketAddr,
    /// Events between snapshots of a session's state.
    pub snapshot_every: u64,
    /// Requests a single bearer token may make over the process lifetime.
    pub token_request_cap: u64,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            bind_addr: DEFAULT_BIND_ADDR.parse().expect("valid default address"),
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            token_request_cap: DEFAULT_TOKEN_REQUEST_CAP,
        }
    }

    /// Reads `GCI_DATA_DIR`, `GCI_BIND_ADDR`, `GCI_SNAPSHOT_EVERY` and
    /// `GCI_TOKEN_REQUEST_CAP`, falling back to the defaults.
    pub fn from_env() -> Result<Self, ServiceError> {
        let mut config = Self::new(env::var_os("GCI_DATA_DIR").map_or_else(|| DEFAULT_DATA_DIR.into(), PathBuf::from));
        if let Some(addr) = var("GCI_BIND_ADDR")? {
            config.bind_addr = addr
                .parse()
                .map_err(|_| ServiceError::Config(format!("GCI_BIND_ADDR: not a socket address: {addr}")))?;
        }
        if let Some(n) = var("GCI_SNAPSHOT_EVERY")? {
            config.snapshot_every = positive("GCI_SNAPSHOT_EVERY", &n)?;
        }
        if let Some(n) = var("GCI_TOKEN_REQUEST_CAP")? {
            config.token_request_cap = positive("GCI_TOKEN_REQUEST_CAP", &n)?;
        }
        Ok(config)
    }
}

fn var(name: &str) -> Result<Option<String>, ServiceError> {
    match env::var(name) {
        Ok(v) => Ok(Some(v)),
        Err(env::VarError::NotPresent) => Ok(None),
        Err(env::VarError::NotUnicode(_)) => Err(ServiceError::Config(format!("{name}: not valid UTF-8"))),
    }
}

fn positive(name: &str, value: &str) -> Result<u64, ServiceError> {
    match value.trim().parse::<u64>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(ServiceError::Config(format!(
            "{name}: expected a positive integer, got {value:?}"
        ))),
    }
}
