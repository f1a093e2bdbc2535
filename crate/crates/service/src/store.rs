//! File-backed session persistence.
//!
//! Each session lives in its own directory holding the event log
//! (`events.jsonl`, one canonical JSON line per event) and, once enough
//! events exist, a snapshot of the replayed state (`snapshot.json`). The
//! log is the source of truth; the snapshot only saves replay work and is
//! ignored whenever it does not line up with the log.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use gci_core::deliberation::{parse_jsonl, SessionEvent};
use gci_core::{DeliberationError, Session};
use thiserror::Error;

use crate::ApiError;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
const SNAPSHOT_TMP: &str = "snapshot.json.tmp";

/// Why a stored session could not be brought back.
#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("cannot read the event log: {0}")]
    Io(#[from] io::Error),
    #[error("event log rejected: {0}")]
    Log(#[from] DeliberationError),
    #[error("the final log line is complete but its terminating newline is damaged")]
    DamagedTail,
}

/// A live session together with its append-only log file.
#[derive(Debug)]
pub struct StoredSession {
    session: Session,
    dir: PathBuf,
    file: File,
    /// Events known to be durable on disk.
    persisted: u64,
    /// Sequence number covered by the newest snapshot.
    snapshot_seq: u64,
}

impl StoredSession {
    /// Writes a freshly created session to `dir`, which must not exist yet.
    pub fn create(dir: &Path, session: Session) -> io::Result<Self> {
        fs::create_dir_all(dir.parent().unwrap_or(dir))?;
        fs::create_dir(dir)?;
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(dir.join(EVENTS_FILE))?;
        sync_dir(dir)?;
        if let Some(parent) = dir.parent() {
            sync_dir(parent)?;
        }
        let mut stored = Self {
            session,
            dir: dir.to_owned(),
            file,
            persisted: 0,
            snapshot_seq: 0,
        };
        stored.flush_new_events()?;
        Ok(stored)
    }

    /// Rebuilds the session stored in `dir` from its log, starting from the
    /// snapshot when it matches.
    ///
    /// A final line without a newline that does not parse is the remnant of
    /// a write that never completed (and was therefore never acknowledged);
    /// it is cut off. No proper prefix of a line parses once its last byte
    /// is dropped, so a tail that does is a whole entry whose newline was
    /// overwritten, and is rejected rather than cut. Any other damage
    /// rejects the whole log.
    pub fn open(dir: &Path) -> Result<Self, RecoveryError> {
        let path = dir.join(EVENTS_FILE);
        let mut bytes = fs::read(&path)?;
        let complete = complete_prefix(&bytes);
        if complete < bytes.len() {
            let tail = &bytes[complete..];
            if serde_json::from_slice::<SessionEvent>(tail).is_ok() {
                bytes.push(b'\n');
            } else if serde_json::from_slice::<SessionEvent>(&tail[..tail.len() - 1]).is_ok() {
                return Err(RecoveryError::DamagedTail);
            } else {
                tracing::warn!(dir = %dir.display(), bytes = tail.len(), "dropping incomplete final log line");
                bytes.truncate(complete);
            }
            rewrite(&path, &bytes)?;
        }
        let events = parse_jsonl(&bytes).map_err(DeliberationError::from)?;

        let snapshot = read_snapshot(dir).and_then(|snap| match Session::resume(snap, &events) {
            Ok(s) => Some(s),
            Err(e) => {
                tracing::warn!(dir = %dir.display(), error = %e, "ignoring stale snapshot");
                None
            }
        });
        let snapshot_seq = snapshot.as_ref().map_or(0, Session::next_seq);
        let session = match snapshot {
            Some(s) => s,
            None => Session::replay(&events)?,
        };
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Self {
            persisted: session.next_seq(),
            session,
            dir: dir.to_owned(),
            file,
            snapshot_seq,
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Runs `command` against the session and makes every event it
    /// produced durable before returning. A rejected command leaves both
    /// the session and the log untouched. If the log cannot be written,
    /// the in-memory state is rebuilt from disk so that it never runs
    /// ahead of what was persisted.
    pub fn execute<T>(
        &mut self,
        snapshot_every: u64,
        command: impl FnOnce(&mut Session) -> Result<T, DeliberationError>,
    ) -> Result<T, ApiError> {
        let out = command(&mut self.session)?;
        if let Err(e) = self.flush_new_events() {
            tracing::error!(dir = %self.dir.display(), error = %e, "event log write failed; reloading");
            match Self::open(&self.dir) {
                Ok(reloaded) => *self = reloaded,
                Err(re) => tracing::error!(dir = %self.dir.display(), error = %re, "reload after write failure failed"),
            }
            return Err(ApiError::internal(
                "persistence_failed",
                "the event could not be stored",
            ));
        }
        if self.session.next_seq() >= self.snapshot_seq + snapshot_every {
            if let Err(e) = self.write_snapshot() {
                tracing::warn!(dir = %self.dir.display(), error = %e, "snapshot failed");
            }
        }
        Ok(out)
    }

    fn flush_new_events(&mut self) -> io::Result<()> {
        let fresh = &self.session.events()[self.persisted as usize..];
        if fresh.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for entry in fresh {
            buf.push_str(&entry.to_line());
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.sync_data()?;
        self.persisted = self.session.next_seq();
        Ok(())
    }

    /// Atomically replaces the snapshot with the current state.
    pub fn write_snapshot(&mut self) -> io::Result<()> {
        let tmp = self.dir.join(SNAPSHOT_TMP);
        let json = serde_json::to_vec(&self.session).map_err(io::Error::other)?;
        let mut f = File::create(&tmp)?;
        f.write_all(&json)?;
        f.sync_all()?;
        fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        sync_dir(&self.dir)?;
        self.snapshot_seq = self.session.next_seq();
        Ok(())
    }
}

/// Length of the prefix that ends in a newline.
fn complete_prefix(bytes: &[u8]) -> usize {
    bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1)
}

fn read_snapshot(dir: &Path) -> Option<Session> {
    let bytes = fs::read(dir.join(SNAPSHOT_FILE)).ok()?;
    match serde_json::from_slice(&bytes) {
        Ok(s) => Some(s),
        Err(e) => {
            tracing::warn!(dir = %dir.display(), error = %e, "unreadable snapshot");
            None
        }
    }
}

fn rewrite(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = OpenOptions::new().write(true).truncate(true).open(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    // directory fsync makes new entries durable; not every platform allows it
    match File::open(dir).and_then(|d| d.sync_all()) {
        Err(e) if e.kind() != io::ErrorKind::NotFound && cfg!(unix) => Err(e),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gci_core::deliberation::{ParticipantId, SessionId};
    use gci_core::SessionConfig;

    fn session() -> Session {
        let config = SessionConfig {
            particles: 50,
            ..SessionConfig::default()
        };
        Session::create(SessionId::new("s"), config, ParticipantId::new("f"), None).unwrap()
    }

    #[test]
    fn events_survive_reopen() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s");
        let mut stored = StoredSession::create(&dir, session()).unwrap();
        stored
            .execute(100, |s| s.submit_idea(&ParticipantId::new("f"), "an idea", None))
            .unwrap();
        let hash = stored.session().state_hash();
        drop(stored);
        let reopened = StoredSession::open(&dir).unwrap();
        assert_eq!(reopened.session().state_hash(), hash);
    }

    #[test]
    fn rejected_commands_write_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s");
        let mut stored = StoredSession::create(&dir, session()).unwrap();
        let err = stored
            .execute(100, |s| s.submit_idea(&ParticipantId::new("f"), "  ", None))
            .unwrap_err();
        assert_eq!(err.code, "empty_text");
        assert_eq!(fs::read_to_string(dir.join(EVENTS_FILE)).unwrap().lines().count(), 1);
    }

    #[test]
    fn torn_tail_is_dropped_and_complete_tail_kept() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s");
        let mut stored = StoredSession::create(&dir, session()).unwrap();
        stored
            .execute(100, |s| s.submit_idea(&ParticipantId::new("f"), "an idea", None))
            .unwrap();
        let hash = stored.session().state_hash();
        drop(stored);
        let path = dir.join(EVENTS_FILE);
        let good = fs::read(&path).unwrap();

        let mut torn = good.clone();
        torn.extend_from_slice(br#"{"seq":2,"kind":"idea-sub"#);
        fs::write(&path, &torn).unwrap();
        assert_eq!(StoredSession::open(&dir).unwrap().session().state_hash(), hash);
        assert_eq!(fs::read(&path).unwrap(), good);

        fs::write(&path, &good[..good.len() - 1]).unwrap();
        assert_eq!(StoredSession::open(&dir).unwrap().session().state_hash(), hash);
        assert_eq!(fs::read(&path).unwrap(), good);

        // a flipped bit in the final newline is damage, not a torn write
        for bit in 0..8 {
            let mut flipped = good.clone();
            *flipped.last_mut().unwrap() ^= 1 << bit;
            fs::write(&path, &flipped).unwrap();
            assert!(
                matches!(StoredSession::open(&dir), Err(RecoveryError::DamagedTail)),
                "bit {bit}"
            );
            assert_eq!(fs::read(&path).unwrap(), flipped);
        }
    }

    #[test]
    fn snapshot_resume_matches_full_replay() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s");
        let mut stored = StoredSession::create(&dir, session()).unwrap();
        for i in 0..5 {
            stored
                .execute(2, |s| {
                    s.submit_idea(&ParticipantId::new("f"), &format!("idea {i}"), None)
                })
                .unwrap();
        }
        assert!(dir.join(SNAPSHOT_FILE).exists());
        let hash = stored.session().state_hash();
        drop(stored);
        assert_eq!(StoredSession::open(&dir).unwrap().session().state_hash(), hash);
        // a snapshot that no longer matches the log is ignored
        fs::write(dir.join(SNAPSHOT_FILE), b"{}").unwrap();
        assert_eq!(StoredSession::open(&dir).unwrap().session().state_hash(), hash);
    }
}
