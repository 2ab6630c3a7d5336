//! JSON shapes returned by the API.

use std::collections::BTreeMap;

use serde::Serialize;
use triadtale_core::backend::ImageRef;
use triadtale_core::ids::{ParticipantId, SessionId};
use triadtale_core::jobs::JobStatus;
use triadtale_core::pipeline::StorySegment;
use triadtale_core::session::{ChapterStep, Inquiry, Participant, Scenario};
use triadtale_core::{ChapterIndex, Role, Session, SessionPhase};

#[derive(Debug, Serialize)]
pub struct CharacterView {
    pub name: Option<String>,
    pub source_image: ImageRef,
    pub avatar: Option<ImageRef>,
    pub style_tokens: String,
    pub confirmed: bool,
}

/// `GET /sessions/{id}`. Built from one read snapshot, so phase and
/// segments always agree.
#[derive(Debug, Serialize)]
pub struct SessionView {
    pub session_id: SessionId,
    pub phase: SessionPhase,
    pub current_turn: Option<Role>,
    /// Present while the chapter waits for input.
    pub inquiry: Option<Inquiry>,
    pub scenario: Option<Scenario>,
    pub participants: Vec<Participant>,
    pub character: Option<CharacterView>,
    pub segments: Vec<StorySegment>,
    pub regenerations: BTreeMap<ChapterIndex, u32>,
    pub latest_job: Option<JobStatus>,
    pub last_seq: u64,
}

impl SessionView {
    pub fn new(session: &Session, latest_job: Option<JobStatus>) -> Self {
        let awaiting = matches!(
            session.phase,
            SessionPhase::Chapter {
                step: ChapterStep::AwaitingInput,
                ..
            }
        );
        Self {
            session_id: session.id.clone(),
            phase: session.phase,
            current_turn: session.current_turn().ok(),
            inquiry: session.inquiry.clone().filter(|_| awaiting),
            scenario: session.scenario.clone(),
            participants: session.participants.clone(),
            character: session.character.as_ref().map(|c| CharacterView {
                name: c.confirmed.then(|| c.name.clone()),
                source_image: c.source_image.clone(),
                avatar: c.avatar.clone(),
                style_tokens: c.style_tokens.clone(),
                confirmed: c.confirmed,
            }),
            segments: session.segments.values().cloned().collect(),
            regenerations: session.regenerations.clone(),
            latest_job,
            last_seq: session.last_seq(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct JoinView {
    pub participant_id: ParticipantId,
    /// Bearer token for this participant; shown once.
    pub token: String,
    pub session: SessionView,
}

#[derive(Debug, Serialize)]
pub struct SourceView {
    pub image: ImageRef,
    pub session: SessionView,
}
