use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::{fs, io};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::assignment::{select_pair, Pair};
use super::decision::{DecisionInput, DecisionMatrix};
use super::events::{canonical_json, verify_chain, Event, EventLog, SessionEvent, GENESIS_HASH};
use super::voice::{surface_tensions, CollectiveVoice, Contribution, Tension};
use super::{DeliberationError, ParticipantId, ParticipantRecord, Phase, Role, SessionConfig, SessionId};
use crate::judgment::{ComparisonTally, ItemId, Judgment, ScorePosterior};
use crate::rng;

type Result<T> = std::result::Result<T, DeliberationError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Idea {
    pub item: ItemId,
    pub text: String,
    /// Internal only; excluded from every contributor-facing view.
    pub contributor: ParticipantId,
    pub parent: Option<ItemId>,
    pub submitted_epoch: u64,
}

/// A pair handed to one reviewer, in presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub participant: ParticipantId,
    pub first: ItemId,
    pub second: ItemId,
    pub answered: bool,
}

impl Assignment {
    pub fn pair(&self) -> Pair {
        Pair::new(self.first.clone(), self.second.clone()).expect("assignments pair distinct items")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskOutcome {
    Assigned(Assignment),
    /// Every pair this participant may review is authored by them or done.
    NoEligiblePairs,
    /// The comparison budget is spent.
    AwaitingConvergence,
}

/// The files a finished session is archived as.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportBundle {
    /// Config and full state, as JSON.
    pub session_json: String,
    pub events_jsonl: String,
    /// `rank,item,mean,topk_prob`, one row per idea in voice order.
    pub voice_csv: String,
}

impl ExportBundle {
    pub const SESSION_FILE: &'static str = "session.json";
    pub const EVENTS_FILE: &'static str = "events.jsonl";
    pub const VOICE_FILE: &'static str = "voice.csv";

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(Self::SESSION_FILE), &self.session_json)?;
        fs::write(dir.join(Self::EVENTS_FILE), &self.events_jsonl)?;
        fs::write(dir.join(Self::VOICE_FILE), &self.voice_csv)
    }
}

/// One deliberation session. All mutation goes through [`Event`]s appended
/// to the session's log, so the state is always a replay of that log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    id: SessionId,
    config: SessionConfig,
    phase: Phase,
    participants: BTreeMap<ParticipantId, ParticipantRecord>,
    ideas: BTreeMap<ItemId, Idea>,
    tally: ComparisonTally,
    posterior: ScorePosterior,
    #[serde(with = "entries")]
    assignments: BTreeMap<(ParticipantId, Pair), Assignment>,
    #[serde(with = "entries")]
    pair_counts: BTreeMap<Pair, u64>,
    assignments_made: u64,
    judgments: u64,
    /// Whether each judgment changed the top-k set, in order.
    topk_changes: Vec<bool>,
    voice: CollectiveVoice,
    decisions: Vec<DecisionMatrix>,
    next_seq: u64,
    head_hash: String,
    #[serde(skip)]
    log: EventLog,
}

impl Session {
    /// Starts a session in the collecting phase with `facilitator` as its
    /// first participant.
    pub fn create(
        id: SessionId,
        config: SessionConfig,
        facilitator: ParticipantId,
        credential_hash: Option<String>,
    ) -> Result<Self> {
        config.validate()?;
        let event = Event::SessionCreated {
            session_id: id,
            config,
            facilitator: ParticipantRecord {
                id: facilitator,
                alias: "facilitator".into(),
                role: Role::Facilitator,
                credential_hash,
            },
        };
        let mut session = Self::from_created(&event)?;
        session.log.append(&event);
        session.sync_head();
        Ok(session)
    }

    fn from_created(event: &Event) -> Result<Self> {
        let Event::SessionCreated {
            session_id,
            config,
            facilitator,
        } = event
        else {
            return Err(DeliberationError::MissingSessionCreated);
        };
        config.validate()?;
        let posterior = ScorePosterior::empty(config.particles, rng::child_seed(config.seed, &[b"posterior"]))?;
        Ok(Self {
            id: session_id.clone(),
            config: config.clone(),
            phase: Phase::Collecting,
            participants: [(facilitator.id.clone(), facilitator.clone())].into(),
            ideas: BTreeMap::new(),
            tally: ComparisonTally::new(),
            posterior,
            assignments: BTreeMap::new(),
            pair_counts: BTreeMap::new(),
            assignments_made: 0,
            judgments: 0,
            topk_changes: Vec::new(),
            voice: CollectiveVoice::default(),
            decisions: Vec::new(),
            next_seq: 0,
            head_hash: GENESIS_HASH.to_owned(),
            log: EventLog::new(),
        })
    }

    /// Rebuilds a session from its verified event log.
    pub fn replay(events: &[SessionEvent]) -> Result<Self> {
        verify_chain(events)?;
        let first = events.first().ok_or(DeliberationError::MissingSessionCreated)?;
        let mut session = Self::from_created(&first.event()?)?;
        session.apply_entries(&events[1..])?;
        session.log = EventLog::from_verified(events.to_vec());
        session.sync_head();
        Ok(session)
    }

    /// Parses, verifies and replays a JSON Lines log.
    pub fn replay_jsonl(text: &[u8]) -> Result<Self> {
        Self::replay(&super::events::parse_jsonl(text)?)
    }

    /// Continues from a snapshot taken at some prefix of `events`, applying
    /// only the suffix. The snapshot must end exactly on a hash in the log.
    pub fn resume(mut snapshot: Session, events: &[SessionEvent]) -> Result<Self> {
        verify_chain(events)?;
        let at = snapshot.next_seq as usize;
        let matches = at > 0 && at <= events.len() && events[at - 1].hash == snapshot.head_hash;
        if !matches {
            return Err(DeliberationError::Replay {
                seq: snapshot.next_seq,
                reason: "snapshot does not match the event log".into(),
            });
        }
        snapshot.apply_entries(&events[at..])?;
        snapshot.log = EventLog::from_verified(events.to_vec());
        snapshot.sync_head();
        Ok(snapshot)
    }

    fn apply_entries(&mut self, entries: &[SessionEvent]) -> Result<()> {
        for entry in entries {
            let event = entry.event()?;
            if matches!(event, Event::SessionCreated { .. }) {
                return Err(DeliberationError::Replay {
                    seq: entry.seq,
                    reason: "duplicate session-created".into(),
                });
            }
            self.apply(&event).map_err(|e| DeliberationError::Replay {
                seq: entry.seq,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    // ---- accessors -------------------------------------------------------

    pub fn id(&self) -> &SessionId {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn participants(&self) -> impl Iterator<Item = &ParticipantRecord> {
        self.participants.values()
    }

    pub fn participant(&self, id: &ParticipantId) -> Option<&ParticipantRecord> {
        self.participants.get(id)
    }

    pub fn find_by_credential(&self, credential_hash: &str) -> Option<&ParticipantRecord> {
        self.participants
            .values()
            .find(|p| p.credential_hash.as_deref() == Some(credential_hash))
    }

    pub fn ideas(&self) -> impl Iterator<Item = &Idea> {
        self.ideas.values()
    }

    pub fn idea(&self, item: &ItemId) -> Option<&Idea> {
        self.ideas.get(item)
    }

    pub fn tally(&self) -> &ComparisonTally {
        &self.tally
    }

    pub fn posterior(&self) -> &ScorePosterior {
        &self.posterior
    }

    pub fn voice(&self) -> &CollectiveVoice {
        &self.voice
    }

    pub fn decisions(&self) -> &[DecisionMatrix] {
        &self.decisions
    }

    pub fn judgment_count(&self) -> u64 {
        self.judgments
    }

    pub fn assignment_count(&self) -> u64 {
        self.assignments_made
    }

    pub fn assignments(&self) -> impl Iterator<Item = &Assignment> {
        self.assignments.values()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn events(&self) -> &[SessionEvent] {
        self.log.entries()
    }

    /// Sequence number of the next event.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn head_hash(&self) -> &str {
        &self.head_hash
    }

    /// SHA-256 over the canonical JSON of the full session state.
    pub fn state_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("sessions serialize");
        hex::encode(Sha256::digest(canonical_json(&value).as_bytes()))
    }

    /// Item id assigned to an idea with `text` in this session.
    pub fn item_id_for(&self, text: &str) -> ItemId {
        let mut h = Sha256::new();
        h.update(self.id.as_str().as_bytes());
        h.update([0]);
        h.update(text.trim().as_bytes());
        ItemId::new(format!("idea-{}", &hex::encode(h.finalize())[..16]))
    }

    pub fn voice_csv(&self) -> String {
        let mut out = String::from("rank,item,mean,topk_prob\n");
        for (rank, e) in self.voice.entries.iter().enumerate() {
            writeln!(out, "{},{},{},{}", rank + 1, e.item, e.mean, e.topk_prob).expect("writing to a String");
        }
        out
    }

    pub fn export(&self) -> ExportBundle {
        ExportBundle {
            session_json: serde_json::to_string_pretty(self).expect("sessions serialize"),
            events_jsonl: self.log.to_jsonl(),
            voice_csv: self.voice_csv(),
        }
    }

    // ---- commands ---------------------------------------------------------

    /// Adds a contributor. Joining again with an existing id returns the
    /// existing record without a new event.
    pub fn join(&mut self, id: ParticipantId, credential_hash: Option<String>) -> Result<ParticipantRecord> {
        if let Some(existing) = self.participants.get(&id) {
            return Ok(existing.clone());
        }
        let alias = format!("contributor-{:02}", self.participants.len());
        let record = ParticipantRecord {
            id,
            alias,
            role: Role::Contributor,
            credential_hash,
        };
        self.commit(Event::ParticipantJoined(record.clone()))?;
        Ok(record)
    }

    pub fn submit_idea(&mut self, participant: &ParticipantId, text: &str, parent: Option<ItemId>) -> Result<ItemId> {
        let item = self.item_id_for(text);
        self.commit(Event::IdeaSubmitted {
            item: item.clone(),
            text: text.trim().to_owned(),
            contributor: participant.clone(),
            parent,
            epoch: self.judgments,
        })?;
        Ok(item)
    }

    /// Returns the participant's open assignment, or assigns a new pair.
    pub fn next_task(&mut self, participant: &ParticipantId, seed: u64) -> Result<TaskOutcome> {
        self.require_participant(participant)?;
        self.require_phase(&[Phase::Reviewing])?;
        if let Some(open) = self.open_assignment(participant) {
            return Ok(TaskOutcome::Assigned(open.clone()));
        }
        let candidates = self.eligible_pairs(participant);
        if candidates.is_empty() {
            return Ok(TaskOutcome::NoEligiblePairs);
        }
        if self.assignments_made >= self.config.comparison_budget {
            return Ok(TaskOutcome::AwaitingConvergence);
        }
        let mut draw = rng::stream(seed, &[b"task"]);
        let pair = select_pair(
            &self.posterior,
            &candidates,
            &self.pair_counts,
            self.config.policy,
            &mut draw,
        );
        let (first, second) = if draw.random::<bool>() {
            (pair.high().clone(), pair.low().clone())
        } else {
            (pair.low().clone(), pair.high().clone())
        };
        self.commit(Event::TaskAssigned {
            participant: participant.clone(),
            first: first.clone(),
            second: second.clone(),
            seed,
        })?;
        Ok(TaskOutcome::Assigned(Assignment {
            participant: participant.clone(),
            first,
            second,
            answered: false,
        }))
    }

    /// Records the reviewer's answer to their assignment and returns the
    /// refreshed collective voice.
    pub fn record_judgment(
        &mut self,
        participant: &ParticipantId,
        winner: &ItemId,
        loser: &ItemId,
    ) -> Result<CollectiveVoice> {
        self.commit(Event::JudgmentRecorded {
            participant: participant.clone(),
            winner: winner.clone(),
            loser: loser.clone(),
        })?;
        Ok(self.voice.clone())
    }

    pub fn change_phase(&mut self, to: Phase) -> Result<()> {
        self.commit(Event::PhaseChanged { from: self.phase, to })
    }

    pub fn record_decision(&mut self, input: DecisionInput) -> Result<DecisionMatrix> {
        self.commit(Event::CriterionScored(input))?;
        Ok(self.decisions.last().expect("just recorded").clone())
    }

    // ---- queries ----------------------------------------------------------

    /// Fraction of the last `window` judgments that left the top-k set
    /// unchanged; 0 until `window` judgments exist.
    pub fn convergence_metric(&self, window: usize) -> f64 {
        if window == 0 || self.topk_changes.len() < window {
            return 0.0;
        }
        let recent = &self.topk_changes[self.topk_changes.len() - window..];
        recent.iter().filter(|changed| !**changed).count() as f64 / window as f64
    }

    pub fn surface_tensions(&self, threshold: f64) -> Vec<Tension> {
        surface_tensions(&self.tally, threshold)
    }

    /// Participants ranked by the summed posterior mean of their ideas.
    pub fn contribution_ranking(&self) -> Result<Vec<Contribution>> {
        if self.phase < Phase::Converged {
            return Err(DeliberationError::RankingUnavailable);
        }
        let means = if self.ideas.is_empty() {
            None
        } else {
            Some(self.posterior.means()?)
        };
        let mut out: Vec<Contribution> = self
            .participants
            .values()
            .filter(|p| p.role == Role::Contributor || self.ideas.values().any(|i| i.contributor == p.id))
            .map(|p| {
                let own: Vec<&Idea> = self.ideas.values().filter(|i| i.contributor == p.id).collect();
                let relevance = own
                    .iter()
                    .map(|i| means.as_ref().and_then(|m| m.get(&i.item)).unwrap_or(0.0))
                    .sum();
                Contribution {
                    participant: p.id.clone(),
                    alias: p.alias.clone(),
                    relevance,
                    ideas: own.len(),
                }
            })
            .collect();
        out.sort_by(|a, b| {
            b.relevance
                .total_cmp(&a.relevance)
                .then_with(|| a.participant.cmp(&b.participant))
        });
        Ok(out)
    }

    /// Pairs this participant may still be assigned: neither item is theirs
    /// and they have not been given the pair before.
    pub fn eligible_pairs(&self, participant: &ParticipantId) -> Vec<Pair> {
        let mine: Vec<&ItemId> = self
            .ideas
            .values()
            .filter(|i| &i.contributor != participant)
            .map(|i| &i.item)
            .collect();
        let mut out = Vec::new();
        for (a, x) in mine.iter().enumerate() {
            for y in &mine[a + 1..] {
                let pair = Pair::new((*x).clone(), (*y).clone()).expect("distinct ideas");
                if !self.assignments.contains_key(&(participant.clone(), pair.clone())) {
                    out.push(pair);
                }
            }
        }
        out
    }

    pub fn open_assignment(&self, participant: &ParticipantId) -> Option<&Assignment> {
        self.assignments
            .values()
            .find(|a| &a.participant == participant && !a.answered)
    }

    // ---- event application ------------------------------------------------

    fn commit(&mut self, event: Event) -> Result<()> {
        self.apply(&event)?;
        self.log.append(&event);
        self.sync_head();
        Ok(())
    }

    fn sync_head(&mut self) {
        self.next_seq = self.log.len() as u64;
        self.head_hash = self.log.head_hash().to_owned();
    }

    /// Validates `event` against the current state, then applies it. A
    /// rejected event leaves the session untouched.
    fn apply(&mut self, event: &Event) -> Result<()> {
        match event {
            Event::SessionCreated { .. } => Err(DeliberationError::Replay {
                seq: self.next_seq,
                reason: "session already created".into(),
            }),
            Event::ParticipantJoined(record) => {
                if self.participants.contains_key(&record.id) {
                    return Err(DeliberationError::ParticipantExists);
                }
                self.participants.insert(record.id.clone(), record.clone());
                Ok(())
            }
            Event::IdeaSubmitted {
                item,
                text,
                contributor,
                parent,
                epoch,
            } => {
                self.require_phase(&[Phase::Collecting, Phase::Reviewing])?;
                self.require_participant(contributor)?;
                if text.trim().is_empty() {
                    return Err(DeliberationError::EmptyText);
                }
                if *item != self.item_id_for(text) || *epoch != self.judgments {
                    return Err(DeliberationError::Replay {
                        seq: self.next_seq,
                        reason: "idea-submitted payload is inconsistent".into(),
                    });
                }
                if self.ideas.contains_key(item) {
                    return Err(DeliberationError::DuplicateIdea);
                }
                if let Some(p) = parent {
                    self.require_item(p)?;
                }
                let mut posterior = self.posterior.clone();
                posterior.insert_item(item.clone())?;
                let voice = self.compute_voice(&posterior)?;
                self.ideas.insert(
                    item.clone(),
                    Idea {
                        item: item.clone(),
                        text: text.clone(),
                        contributor: contributor.clone(),
                        parent: parent.clone(),
                        submitted_epoch: *epoch,
                    },
                );
                self.posterior = posterior;
                self.voice = voice;
                Ok(())
            }
            Event::TaskAssigned {
                participant,
                first,
                second,
                ..
            } => {
                self.require_phase(&[Phase::Reviewing])?;
                self.require_participant(participant)?;
                self.require_item(first)?;
                self.require_item(second)?;
                let pair = Pair::new(first.clone(), second.clone()).ok_or(DeliberationError::DegenerateJudgment)?;
                if !self.eligible_pairs(participant).contains(&pair)
                    || self.open_assignment(participant).is_some()
                    || self.assignments_made >= self.config.comparison_budget
                {
                    return Err(DeliberationError::Replay {
                        seq: self.next_seq,
                        reason: "assignment violates the assignment rules".into(),
                    });
                }
                self.assignments.insert(
                    (participant.clone(), pair.clone()),
                    Assignment {
                        participant: participant.clone(),
                        first: first.clone(),
                        second: second.clone(),
                        answered: false,
                    },
                );
                *self.pair_counts.entry(pair).or_insert(0) += 1;
                self.assignments_made += 1;
                Ok(())
            }
            Event::JudgmentRecorded {
                participant,
                winner,
                loser,
            } => {
                self.require_phase(&[Phase::Reviewing])?;
                self.require_participant(participant)?;
                self.require_item(winner)?;
                self.require_item(loser)?;
                let pair = Pair::new(winner.clone(), loser.clone()).ok_or(DeliberationError::DegenerateJudgment)?;
                let key = (participant.clone(), pair);
                match self.assignments.get(&key) {
                    None => return Err(DeliberationError::UnassignedPair),
                    Some(a) if a.answered => return Err(DeliberationError::DuplicateJudgment),
                    Some(_) => {}
                }

                let mut posterior = self.posterior.observe(&Judgment {
                    winner: winner.clone(),
                    loser: loser.clone(),
                })?;
                if self.config.drift_sigma > 0.0 {
                    let seed = rng::child_seed(self.config.seed, &[b"drift", &self.judgments.to_le_bytes()]);
                    posterior = posterior.drift(self.config.drift_sigma, seed)?;
                }
                let before = self.voice.top_set();

                self.assignments.get_mut(&key).expect("checked").answered = true;
                self.tally.record(winner, loser)?;
                self.posterior = posterior;
                self.judgments += 1;
                let mut voice = self.compute_voice(&self.posterior)?;
                self.topk_changes.push(voice.top_set() != before);
                voice.convergence = self.convergence_metric(self.config.convergence_window);
                self.voice = voice;

                if self.phase == Phase::Reviewing
                    && self.judgments >= self.config.min_judgments
                    && self.voice.convergence >= self.config.convergence_threshold
                    && self.topk_changes.len() >= self.config.convergence_window
                {
                    self.phase = Phase::Converged;
                }
                Ok(())
            }
            Event::CriterionScored(input) => {
                for c in &input.candidates {
                    self.require_item(c)?;
                }
                let matrix = input.evaluate()?;
                self.decisions.push(matrix);
                Ok(())
            }
            Event::PhaseChanged { from, to } => {
                if *from != self.phase || to <= from {
                    return Err(DeliberationError::InvalidTransition {
                        from: self.phase,
                        to: *to,
                    });
                }
                self.phase = *to;
                Ok(())
            }
        }
    }

    fn compute_voice(&self, posterior: &ScorePosterior) -> Result<CollectiveVoice> {
        CollectiveVoice::from_posterior(
            posterior,
            self.config.top_k,
            self.convergence_metric(self.config.convergence_window),
            self.judgments,
        )
    }

    fn require_phase(&self, allowed: &[Phase]) -> Result<()> {
        if allowed.contains(&self.phase) {
            Ok(())
        } else {
            Err(DeliberationError::Phase { phase: self.phase })
        }
    }

    fn require_participant(&self, id: &ParticipantId) -> Result<&ParticipantRecord> {
        self.participants.get(id).ok_or(DeliberationError::UnknownParticipant)
    }

    fn require_item(&self, item: &ItemId) -> Result<&Idea> {
        self.ideas
            .get(item)
            .ok_or_else(|| DeliberationError::UnknownItem(item.clone()))
    }

    /// Participants who authored at least one idea.
    pub fn contributors(&self) -> BTreeSet<&ParticipantId> {
        self.ideas.values().map(|i| &i.contributor).collect()
    }
}

/// Serializes a map with composite keys as a list of `[key, value]` pairs.
mod entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K, V, S>(map: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error>
    where
        K: Serialize,
        V: Serialize,
        S: Serializer,
    {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}
