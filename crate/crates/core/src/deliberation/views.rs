//! Read-only projections of a session for its audiences.
//!
//! Contributor-facing views carry idea texts and opaque item ids only; the
//! authoring participant is omitted until the revealed phase, and numeric
//! scores are withheld until the session has converged.

use serde::{Deserialize, Serialize};

use super::session::{Assignment, Session};
use super::voice::{CollectiveVoice, Tension};
use super::{DeliberationError, ParticipantId, Phase, Role};
use crate::judgment::ItemId;

/// Who a view is rendered for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Viewer {
    Facilitator(ParticipantId),
    Contributor(ParticipantId),
}

impl Viewer {
    pub fn id(&self) -> &ParticipantId {
        match self {
            Viewer::Facilitator(id) | Viewer::Contributor(id) => id,
        }
    }

    pub fn is_facilitator(&self) -> bool {
        matches!(self, Viewer::Facilitator(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeaCard {
    pub item: ItemId,
    pub text: String,
}

/// A pair to compare, in presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub first: IdeaCard,
    pub second: IdeaCard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedIdea {
    /// 1-based position in the collective voice.
    pub rank: usize,
    pub item: ItemId,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topk_prob: Option<f64>,
    /// Authoring participant; facilitators and the revealed phase only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contributor: Option<ParticipantId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contributor_alias: Option<String>,
}

/// The collective voice as shown to contributors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributorVoice {
    pub phase: Phase,
    pub epoch: u64,
    pub k: usize,
    pub ideas: Vec<RankedIdea>,
}

/// The collective voice with everything a facilitator monitors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilitatorVoice {
    pub phase: Phase,
    pub voice: CollectiveVoice,
    pub ideas: Vec<RankedIdea>,
    pub tensions: Vec<Tension>,
    pub convergence: f64,
    pub judgments: u64,
    pub assignments: u64,
    pub comparison_budget: u64,
}

/// One participant's own view of the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantView {
    pub alias: String,
    pub role: Role,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskView>,
    pub own_ideas: Vec<IdeaCard>,
}

impl Session {
    pub fn viewer(&self, id: &ParticipantId) -> Option<Viewer> {
        self.participant(id).map(|p| match p.role {
            Role::Facilitator => Viewer::Facilitator(p.id.clone()),
            Role::Contributor => Viewer::Contributor(p.id.clone()),
        })
    }

    pub fn idea_card(&self, item: &ItemId) -> Option<IdeaCard> {
        self.idea(item).map(|i| IdeaCard {
            item: i.item.clone(),
            text: i.text.clone(),
        })
    }

    pub fn task_view(&self, assignment: &Assignment) -> TaskView {
        let card = |id: &ItemId| self.idea_card(id).expect("assigned items exist");
        TaskView {
            first: card(&assignment.first),
            second: card(&assignment.second),
        }
    }

    fn ranked_ideas(&self, scores: bool, identities: bool) -> Vec<RankedIdea> {
        self.voice()
            .entries
            .iter()
            .enumerate()
            .map(|(rank, entry)| {
                let idea = self.idea(&entry.item).expect("voice covers ideas");
                let author = identities.then_some(&idea.contributor);
                RankedIdea {
                    rank: rank + 1,
                    item: entry.item.clone(),
                    text: idea.text.clone(),
                    mean: scores.then_some(entry.mean),
                    topk_prob: scores.then_some(entry.topk_prob),
                    contributor: author.cloned(),
                    contributor_alias: author.and_then(|a| self.participant(a)).map(|p| p.alias.clone()),
                }
            })
            .collect()
    }

    /// The masked voice: ordering and texts always, scores from convergence
    /// on, authorship only once revealed.
    pub fn contributor_voice(&self) -> ContributorVoice {
        ContributorVoice {
            phase: self.phase(),
            epoch: self.voice().epoch,
            k: self.voice().k,
            ideas: self.ranked_ideas(self.phase() >= Phase::Converged, self.phase() == Phase::Revealed),
        }
    }

    pub fn facilitator_voice(&self, tension_threshold: f64) -> FacilitatorVoice {
        FacilitatorVoice {
            phase: self.phase(),
            voice: self.voice().clone(),
            ideas: self.ranked_ideas(true, true),
            tensions: self.surface_tensions(tension_threshold),
            convergence: self.voice().convergence,
            judgments: self.judgment_count(),
            assignments: self.assignment_count(),
            comparison_budget: self.config().comparison_budget,
        }
    }

    pub fn participant_view(&self, id: &ParticipantId) -> Result<ParticipantView, DeliberationError> {
        let record = self.participant(id).ok_or(DeliberationError::UnknownParticipant)?;
        Ok(ParticipantView {
            alias: record.alias.clone(),
            role: record.role,
            phase: self.phase(),
            task: self.open_assignment(id).map(|a| self.task_view(a)),
            own_ideas: self
                .ideas()
                .filter(|i| &i.contributor == id)
                .map(|i| IdeaCard {
                    item: i.item.clone(),
                    text: i.text.clone(),
                })
                .collect(),
        })
    }
}
