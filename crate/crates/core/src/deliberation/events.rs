//! Hash-chained session events.
//!
//! Wire format: JSON Lines, one object per event with the fields
//! `seq, kind, payload, prev_hash, hash`. Objects are written in canonical
//! form (keys sorted, no insignificant whitespace). The hash of an event is
//! the lowercase hex SHA-256 of the previous hash's hex text followed by the
//! canonical JSON of its payload; the first event chains from 64 zeros.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::decision::DecisionInput;
use super::{ParticipantId, ParticipantRecord, Phase, SessionConfig, SessionId};
use crate::judgment::ItemId;

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    SessionCreated,
    ParticipantJoined,
    IdeaSubmitted,
    TaskAssigned,
    JudgmentRecorded,
    CriterionScored,
    PhaseChanged,
}

/// Typed event content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum Event {
    SessionCreated {
        session_id: SessionId,
        config: SessionConfig,
        facilitator: ParticipantRecord,
    },
    ParticipantJoined(ParticipantRecord),
    IdeaSubmitted {
        item: ItemId,
        text: String,
        contributor: ParticipantId,
        parent: Option<ItemId>,
        /// Judgments recorded before this submission.
        epoch: u64,
    },
    TaskAssigned {
        participant: ParticipantId,
        /// Presentation order.
        first: ItemId,
        second: ItemId,
        seed: u64,
    },
    JudgmentRecorded {
        participant: ParticipantId,
        winner: ItemId,
        loser: ItemId,
    },
    CriterionScored(DecisionInput),
    PhaseChanged {
        from: Phase,
        to: Phase,
    },
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self {
            Event::SessionCreated { .. } => EventKind::SessionCreated,
            Event::ParticipantJoined(_) => EventKind::ParticipantJoined,
            Event::IdeaSubmitted { .. } => EventKind::IdeaSubmitted,
            Event::TaskAssigned { .. } => EventKind::TaskAssigned,
            Event::JudgmentRecorded { .. } => EventKind::JudgmentRecorded,
            Event::CriterionScored(_) => EventKind::CriterionScored,
            Event::PhaseChanged { .. } => EventKind::PhaseChanged,
        }
    }

    fn payload(&self) -> Value {
        let mut tagged = serde_json::to_value(self).expect("events serialize");
        tagged
            .as_object_mut()
            .and_then(|o| o.remove("payload"))
            .unwrap_or(Value::Null)
    }

    fn decode(kind: EventKind, payload: &Value) -> Result<Self, serde_json::Error> {
        let tagged = serde_json::json!({ "kind": kind, "payload": payload });
        serde_json::from_value(tagged)
    }
}

/// One appended, hash-chained log entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Value,
    pub prev_hash: String,
    pub hash: String,
}

impl SessionEvent {
    /// The typed event carried by this entry.
    pub fn event(&self) -> Result<Event, LogError> {
        Event::decode(self.kind, &self.payload).map_err(|e| LogError::new(self.seq, LogFault::Payload(e.to_string())))
    }

    /// Canonical single-line JSON encoding (no trailing newline).
    pub fn to_line(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("entries serialize"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event log rejected at seq {seq}: {fault}")]
pub struct LogError {
    /// Sequence number of the first entry that failed verification.
    pub seq: u64,
    pub fault: LogFault,
}

impl LogError {
    fn new(seq: u64, fault: LogFault) -> Self {
        Self { seq, fault }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogFault {
    #[error("unparseable entry: {0}")]
    Malformed(String),
    #[error("entry is not in canonical form")]
    NonCanonical,
    #[error("expected sequence number {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
    #[error("previous-hash link does not match")]
    BrokenLink,
    #[error("content hash does not match")]
    HashMismatch,
    #[error("payload does not match its kind: {0}")]
    Payload(String),
}

/// Keys sorted, no insignificant whitespace.
///
/// `serde_json::Map` is ordered by key unless the `preserve_order` feature is
/// enabled, which this crate never does.
pub fn canonical_json(value: &Value) -> String {
    serde_json::to_string(value).expect("json values serialize")
}

pub fn chain_hash(prev_hash: &str, payload: &Value) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prev_hash.as_bytes());
    hasher.update(canonical_json(payload).as_bytes());
    hex::encode(hasher.finalize())
}

/// Append-only sequence of hash-chained entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    entries: Vec<SessionEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps entries that have already been verified.
    pub(crate) fn from_verified(entries: Vec<SessionEvent>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[SessionEvent] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head_hash(&self) -> &str {
        self.entries.last().map_or(GENESIS_HASH, |e| e.hash.as_str())
    }

    pub fn append(&mut self, event: &Event) -> &SessionEvent {
        let payload = event.payload();
        let prev_hash = self.head_hash().to_owned();
        let hash = chain_hash(&prev_hash, &payload);
        self.entries.push(SessionEvent {
            seq: self.entries.len() as u64,
            kind: event.kind(),
            payload,
            prev_hash,
            hash,
        });
        self.entries.last().expect("just pushed")
    }

    /// JSON Lines export, one canonical entry per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }
}

/// Checks sequence numbers, hash links, content hashes and payload types.
pub fn verify_chain(entries: &[SessionEvent]) -> Result<(), LogError> {
    let mut prev = GENESIS_HASH;
    for (i, e) in entries.iter().enumerate() {
        let expected = i as u64;
        if e.seq != expected {
            return Err(LogError::new(expected, LogFault::Gap { expected, found: e.seq }));
        }
        if e.prev_hash != prev {
            return Err(LogError::new(e.seq, LogFault::BrokenLink));
        }
        if chain_hash(&e.prev_hash, &e.payload) != e.hash {
            return Err(LogError::new(e.seq, LogFault::HashMismatch));
        }
        e.event()?;
        prev = &e.hash;
    }
    Ok(())
}

/// Parses and verifies a JSON Lines log. Every line must be the canonical
/// encoding of its entry, so any altered byte is caught at the line it
/// falls on.
pub fn parse_jsonl(text: &[u8]) -> Result<Vec<SessionEvent>, LogError> {
    let mut entries = Vec::new();
    let body = text.strip_suffix(b"\n").unwrap_or(text);
    if body.is_empty() {
        return Ok(entries);
    }
    for (i, raw) in body.split(|b| *b == b'\n').enumerate() {
        let seq = i as u64;
        let line = std::str::from_utf8(raw).map_err(|e| LogError::new(seq, LogFault::Malformed(e.to_string())))?;
        let entry: SessionEvent =
            serde_json::from_str(line).map_err(|e| LogError::new(seq, LogFault::Malformed(e.to_string())))?;
        if entry.to_line() != line {
            return Err(LogError::new(seq, LogFault::NonCanonical));
        }
        entries.push(entry);
    }
    verify_chain(&entries)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deliberation::Role;

    fn sample_log() -> EventLog {
        let mut log = EventLog::new();
        log.append(&Event::SessionCreated {
            session_id: SessionId::new("s1"),
            config: SessionConfig::default(),
            facilitator: ParticipantRecord {
                id: ParticipantId::new("f"),
                alias: "facilitator".into(),
                role: Role::Facilitator,
                credential_hash: None,
            },
        });
        log.append(&Event::PhaseChanged {
            from: Phase::Collecting,
            to: Phase::Reviewing,
        });
        log.append(&Event::JudgmentRecorded {
            participant: ParticipantId::new("p"),
            winner: "a".into(),
            loser: "b".into(),
        });
        log
    }

    #[test]
    fn chain_links_and_round_trips() {
        let log = sample_log();
        assert_eq!(log.entries()[0].prev_hash, GENESIS_HASH);
        assert_eq!(log.entries()[1].prev_hash, log.entries()[0].hash);
        let text = log.to_jsonl();
        let parsed = parse_jsonl(text.as_bytes()).unwrap();
        assert_eq!(parsed, log.entries());
        assert_eq!(parsed[2].event().unwrap().kind(), EventKind::JudgmentRecorded);
    }

    #[test]
    fn hash_matches_documented_construction() {
        let payload = serde_json::json!({"b": 1, "a": [true, null]});
        let mut h = Sha256::new();
        h.update(GENESIS_HASH.as_bytes());
        h.update(br#"{"a":[true,null],"b":1}"#);
        assert_eq!(chain_hash(GENESIS_HASH, &payload), hex::encode(h.finalize()));
    }

    #[test]
    fn lines_are_canonical() {
        let log = sample_log();
        let line = log.entries()[1].to_line();
        assert!(line.starts_with(r#"{"hash":""#));
        assert!(
            line.contains(r#""kind":"phase-changed","payload":{"from":"collecting","to":"reviewing"},"prev_hash":""#)
        );
        assert!(!line.contains(' '));
    }

    #[test]
    fn every_single_byte_tamper_is_caught_on_its_line() {
        let text = sample_log().to_jsonl().into_bytes();
        let line_of = |pos: usize| text[..pos].iter().filter(|b| **b == b'\n').count() as u64;
        for pos in 0..text.len() {
            for replacement in [b'x', b'0', b'\n', 0xff] {
                if text[pos] == replacement {
                    continue;
                }
                let mut bad = text.clone();
                bad[pos] = replacement;
                let err = parse_jsonl(&bad).expect_err("tamper must be detected");
                assert_eq!(err.seq, line_of(pos), "byte {pos} -> {replacement:#x}: {err}");
            }
        }
    }

    #[test]
    fn gaps_and_swaps_are_rejected() {
        let mut entries = sample_log().entries().to_vec();
        entries.remove(1);
        let err = verify_chain(&entries).unwrap_err();
        assert_eq!(err.seq, 1);
        assert!(matches!(err.fault, LogFault::Gap { .. }));

        let mut entries = sample_log().entries().to_vec();
        entries[2].payload["winner"] = "b".into();
        entries[2].payload["loser"] = "a".into();
        assert_eq!(verify_chain(&entries).unwrap_err().fault, LogFault::HashMismatch);
    }
}
