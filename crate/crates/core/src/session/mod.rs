//! The session lifecycle as an event-sourced state machine.
//!
//! All state changes go through [`Session::apply`], a total function over
//! `(phase, actor, event)`. Legal triples append one [`LogEntry`]; illegal ones
//! return a [`Rejection`] and leave the session untouched. Replaying the log
//! into a fresh session reproduces it exactly.

pub mod scenario;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::ImageRef;
use crate::character::{validate_name, CharacterProfile};
use crate::ids::{ParticipantId, SessionId};
use crate::narrative::{validate_player_input, ChapterIndex, InputRejection};
use crate::pipeline::StorySegment;

pub use scenario::{Scenario, ScenarioError, ScenarioRegistry};

/// Participants per session, counting a facilitator who holds no role.
pub const MAX_PARTICIPANTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Protagonist,
    Opportunity,
    Challenge,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Protagonist, Role::Opportunity, Role::Challenge];
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Whose input a chapter waits for.
pub fn turn_for(chapter: ChapterIndex) -> Role {
    match chapter.get() {
        1 | 4 => Role::Protagonist,
        2 => Role::Opportunity,
        _ => Role::Challenge,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: ParticipantId,
    pub display_name: String,
    pub role: Option<Role>,
    pub is_facilitator: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChapterStep {
    Inquiry,
    AwaitingInput,
    Generating,
    Review,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionPhase {
    Setup,
    RoleAssignment,
    CharacterConstruction,
    Chapter { chapter: ChapterIndex, step: ChapterStep },
    Presentation,
    Closed,
}

impl SessionPhase {
    /// Position in the major-phase order; chapter sub-steps share a rank.
    pub fn rank(self) -> u8 {
        match self {
            SessionPhase::Setup => 0,
            SessionPhase::RoleAssignment => 1,
            SessionPhase::CharacterConstruction => 2,
            SessionPhase::Chapter { chapter, .. } => 2 + chapter.get(),
            SessionPhase::Presentation => 7,
            SessionPhase::Closed => 8,
        }
    }
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionPhase::Chapter { chapter, step } => write!(f, "Chapter({chapter}, {step:?})"),
            other => fmt::Debug::fmt(other, f),
        }
    }
}

/// Who caused an event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Actor {
    /// The service itself: job results and automatic steps.
    System,
    /// The group acting through a shared device without a participant token.
    Group,
    Participant(ParticipantId),
}

impl From<Actor> for String {
    fn from(actor: Actor) -> String {
        actor.to_string()
    }
}

impl TryFrom<String> for Actor {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.as_str() {
            "system" => Ok(Actor::System),
            "group" => Ok(Actor::Group),
            _ => s
                .strip_prefix("participant:")
                .filter(|id| !id.is_empty())
                .map(|id| Actor::Participant(ParticipantId::from(id)))
                .ok_or_else(|| format!("unknown actor `{s}`")),
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::System => f.write_str("system"),
            Actor::Group => f.write_str("group"),
            Actor::Participant(id) => write!(f, "participant:{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InquirySource {
    Template,
    Backend,
}

/// The question currently put to the group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inquiry {
    pub chapter: ChapterIndex,
    pub text: String,
    pub source: InquirySource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: SessionId,
    },
    ScenarioSelected {
        scenario: Scenario,
    },
    ParticipantJoined {
        participant: Participant,
        /// SHA-256 of the participant's capability token.
        token_digest: Option<String>,
    },
    RoleAssigned {
        participant: ParticipantId,
        role: Role,
    },
    SourceImageIngested {
        image: ImageRef,
    },
    AvatarGenerated {
        avatar: ImageRef,
        style_tokens: String,
    },
    CharacterConfirmed {
        name: String,
    },
    InquiryPresented {
        chapter: ChapterIndex,
        text: String,
        source: InquirySource,
    },
    InputSubmitted {
        chapter: ChapterIndex,
        text: String,
    },
    SegmentGenerated {
        segment: StorySegment,
    },
    GenerationFailed {
        chapter: ChapterIndex,
        kind: String,
        message: String,
    },
    RegenerationRequested {
        chapter: ChapterIndex,
    },
    SegmentAccepted {
        chapter: ChapterIndex,
    },
    SessionClosed,
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::Created { .. } => "created",
            SessionEvent::ScenarioSelected { .. } => "scenario_selected",
            SessionEvent::ParticipantJoined { .. } => "participant_joined",
            SessionEvent::RoleAssigned { .. } => "role_assigned",
            SessionEvent::SourceImageIngested { .. } => "source_image_ingested",
            SessionEvent::AvatarGenerated { .. } => "avatar_generated",
            SessionEvent::CharacterConfirmed { .. } => "character_confirmed",
            SessionEvent::InquiryPresented { .. } => "inquiry_presented",
            SessionEvent::InputSubmitted { .. } => "input_submitted",
            SessionEvent::SegmentGenerated { .. } => "segment_generated",
            SessionEvent::GenerationFailed { .. } => "generation_failed",
            SessionEvent::RegenerationRequested { .. } => "regeneration_requested",
            SessionEvent::SegmentAccepted { .. } => "segment_accepted",
            SessionEvent::SessionClosed => "session_closed",
        }
    }
}

/// One line of `events.log`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub actor: Actor,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum Rejection {
    #[error("`{event}` is not allowed in phase {phase}")]
    WrongPhase { phase: SessionPhase, event: String },
    #[error("{0}")]
    WrongActor(String),
    #[error("{0}")]
    IllegalTransition(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown participant `{0}`")]
    UnknownParticipant(ParticipantId),
    #[error("role {0} is already held")]
    RoleTaken(Role),
    #[error("participant `{participant}` already holds {role}")]
    ParticipantHasRole { participant: ParticipantId, role: Role },
    #[error("the session already has {MAX_PARTICIPANTS} participants")]
    GroupFull,
    #[error("input rejected: {0}")]
    InvalidInput(InputRejection),
    #[error("invalid name: {0}")]
    InvalidName(String),
    #[error("no avatar has been generated yet")]
    NoAvatar,
    #[error("no source image has been uploaded yet")]
    NoSourceImage,
    #[error("segment rejected: {0}")]
    InvalidSegment(String),
}

impl Rejection {
    /// Stable error code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::WrongPhase { .. } => "WrongPhase",
            Rejection::WrongActor(_) => "WrongActor",
            Rejection::IllegalTransition(_) => "IllegalTransition",
            Rejection::UnknownScenario(_) => "UnknownScenario",
            Rejection::UnknownParticipant(_) => "UnknownParticipant",
            Rejection::RoleTaken(_) => "RoleTaken",
            Rejection::ParticipantHasRole { .. } => "ParticipantHasRole",
            Rejection::GroupFull => "GroupFull",
            Rejection::InvalidInput(_) => "InvalidInput",
            Rejection::InvalidName(_) => "InvalidName",
            Rejection::NoAvatar => "NoAvatar",
            Rejection::NoSourceImage => "NoSourceImage",
            Rejection::InvalidSegment(_) => "InvalidSegment",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("event log is empty")]
    Empty,
    #[error("event log must start with `created`")]
    MissingCreated,
    #[error("entry {seq}: expected sequence number {expected}")]
    Sequence { seq: u64, expected: u64 },
    #[error("entry {seq} rejected on replay: {rejection}")]
    Rejected { seq: u64, rejection: Rejection },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub phase: SessionPhase,
    pub scenario: Option<Scenario>,
    pub participants: Vec<Participant>,
    pub character: Option<CharacterProfile>,
    pub segments: BTreeMap<ChapterIndex, StorySegment>,
    pub inquiry: Option<Inquiry>,
    /// Input of the chapter currently generating.
    pub pending_input: Option<String>,
    pub regenerations: BTreeMap<ChapterIndex, u32>,
    #[serde(default)]
    pub token_digests: BTreeMap<ParticipantId, String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub event_log: Vec<LogEntry>,
}

impl Session {
    /// A session in `Setup` whose log holds exactly one `created` entry.
    pub fn create(id: SessionId, at: DateTime<Utc>) -> Self {
        let mut session = Self::blank(id.clone(), at);
        session
            .apply(Actor::System, SessionEvent::Created { session_id: id }, at)
            .expect("created is always legal on a blank session");
        session
    }

    fn blank(id: SessionId, at: DateTime<Utc>) -> Self {
        Self {
            id,
            phase: SessionPhase::Setup,
            scenario: None,
            participants: Vec::new(),
            character: None,
            segments: BTreeMap::new(),
            inquiry: None,
            pending_input: None,
            regenerations: BTreeMap::new(),
            token_digests: BTreeMap::new(),
            created_at: at,
            updated_at: at,
            event_log: Vec::new(),
        }
    }

    /// Rebuilds a session from its log.
    pub fn replay(entries: &[LogEntry]) -> Result<Self, ReplayError> {
        let first = entries.first().ok_or(ReplayError::Empty)?;
        let SessionEvent::Created { session_id } = &first.event else {
            return Err(ReplayError::MissingCreated);
        };
        let mut session = Self::blank(session_id.clone(), first.timestamp);
        for entry in entries {
            let expected = session.event_log.len() as u64 + 1;
            if entry.seq != expected {
                return Err(ReplayError::Sequence {
                    seq: entry.seq,
                    expected,
                });
            }
            session
                .apply(entry.actor.clone(), entry.event.clone(), entry.timestamp)
                .map_err(|rejection| ReplayError::Rejected {
                    seq: entry.seq,
                    rejection,
                })?;
        }
        Ok(session)
    }

    /// Pure form of [`Session::apply`].
    pub fn apply_event(&self, actor: Actor, event: SessionEvent, at: DateTime<Utc>) -> Result<Session, Rejection> {
        let mut next = self.clone();
        next.apply(actor, event, at)?;
        Ok(next)
    }

    /// Applies one event. On rejection nothing changes.
    pub fn apply(&mut self, actor: Actor, event: SessionEvent, at: DateTime<Utc>) -> Result<&LogEntry, Rejection> {
        self.check(&actor, &event)?;
        self.transition(&event);
        let timestamp = self.event_log.last().map_or(at, |last| at.max(last.timestamp));
        self.updated_at = timestamp;
        self.event_log.push(LogEntry {
            seq: self.event_log.len() as u64 + 1,
            timestamp,
            actor,
            event,
        });
        Ok(self.event_log.last().expect("just pushed"))
    }

    /// The role whose input the session is waiting for.
    pub fn current_turn(&self) -> Result<Role, Rejection> {
        match self.phase {
            SessionPhase::Chapter {
                chapter,
                step: ChapterStep::AwaitingInput,
            } => Ok(turn_for(chapter)),
            phase => Err(Rejection::WrongPhase {
                phase,
                event: "current_turn".into(),
            }),
        }
    }

    pub fn participant(&self, id: &ParticipantId) -> Option<&Participant> {
        self.participants.iter().find(|p| &p.id == id)
    }

    pub fn holder_of(&self, role: Role) -> Option<&Participant> {
        self.participants.iter().find(|p| p.role == Some(role))
    }

    /// Chapter and step, when in a chapter.
    pub fn chapter_step(&self) -> Option<(ChapterIndex, ChapterStep)> {
        match self.phase {
            SessionPhase::Chapter { chapter, step } => Some((chapter, step)),
            _ => None,
        }
    }

    pub fn last_seq(&self) -> u64 {
        self.event_log.len() as u64
    }

    fn wrong_phase(&self, event: &SessionEvent) -> Rejection {
        Rejection::WrongPhase {
            phase: self.phase,
            event: event.name().into(),
        }
    }

    fn in_chapter(&self, event: &SessionEvent, chapter: ChapterIndex, step: ChapterStep) -> Result<(), Rejection> {
        match self.phase {
            SessionPhase::Chapter { chapter: c, step: s } if s == step => {
                if c == chapter {
                    Ok(())
                } else {
                    Err(Rejection::IllegalTransition(format!(
                        "`{}` names chapter {chapter} but the session is in chapter {c}",
                        event.name()
                    )))
                }
            }
            _ => Err(self.wrong_phase(event)),
        }
    }

    fn require_system(&self, actor: &Actor, event: &SessionEvent) -> Result<(), Rejection> {
        if *actor == Actor::System {
            Ok(())
        } else {
            Err(Rejection::WrongActor(format!("`{}` is emitted by the service only", event.name())))
        }
    }

    fn require_member(&self, actor: &Actor) -> Result<(), Rejection> {
        match actor {
            Actor::Participant(id) if self.participant(id).is_none() => {
                Err(Rejection::UnknownParticipant(id.clone()))
            }
            _ => Ok(()),
        }
    }

    fn require_role_holder(&self, actor: &Actor, event: &SessionEvent) -> Result<(), Rejection> {
        self.require_member(actor)?;
        match actor {
            Actor::Participant(id) if self.participant(id).is_some_and(|p| p.role.is_none()) => Err(
                Rejection::WrongActor(format!("`{}` needs a participant holding a role", event.name())),
            ),
            _ => Ok(()),
        }
    }

    fn check(&self, actor: &Actor, event: &SessionEvent) -> Result<(), Rejection> {
        use SessionEvent::*;

        if self.event_log.is_empty() != matches!(event, Created { .. }) {
            return Err(if self.event_log.is_empty() {
                Rejection::IllegalTransition("the first event must be `created`".into())
            } else {
                self.wrong_phase(event)
            });
        }

        match event {
            Created { session_id } => {
                self.require_system(actor, event)?;
                if *session_id != self.id {
                    return Err(Rejection::IllegalTransition(format!(
                        "created event names session `{session_id}`"
                    )));
                }
            }
            ScenarioSelected { scenario } => {
                if self.phase != SessionPhase::Setup {
                    return Err(self.wrong_phase(event));
                }
                self.require_member(actor)?;
                scenario
                    .validate()
                    .map_err(|_| Rejection::UnknownScenario(scenario.id.clone()))?;
            }
            ParticipantJoined { participant, .. } => {
                if !matches!(self.phase, SessionPhase::Setup | SessionPhase::RoleAssignment) {
                    return Err(self.wrong_phase(event));
                }
                if matches!(actor, Actor::Participant(_)) {
                    return Err(Rejection::WrongActor("participants cannot register others".into()));
                }
                if self.participants.len() >= MAX_PARTICIPANTS {
                    return Err(Rejection::GroupFull);
                }
                if self.participant(&participant.id).is_some() {
                    return Err(Rejection::IllegalTransition(format!(
                        "participant `{}` already joined",
                        participant.id
                    )));
                }
                if participant.role.is_some() {
                    return Err(Rejection::IllegalTransition("roles are assigned separately".into()));
                }
                validate_name(&participant.display_name).map_err(Rejection::InvalidName)?;
            }
            RoleAssigned { participant, role } => {
                if self.phase != SessionPhase::RoleAssignment {
                    return Err(self.wrong_phase(event));
                }
                self.require_member(actor)?;
                let target = self
                    .participant(participant)
                    .ok_or_else(|| Rejection::UnknownParticipant(participant.clone()))?;
                if self.holder_of(*role).is_some() {
                    return Err(Rejection::RoleTaken(*role));
                }
                if let Some(held) = target.role {
                    return Err(Rejection::ParticipantHasRole {
                        participant: participant.clone(),
                        role: held,
                    });
                }
            }
            SourceImageIngested { .. } => {
                if self.phase != SessionPhase::CharacterConstruction {
                    return Err(self.wrong_phase(event));
                }
                self.require_member(actor)?;
            }
            AvatarGenerated { style_tokens, .. } => {
                if self.phase != SessionPhase::CharacterConstruction {
                    return Err(self.wrong_phase(event));
                }
                self.require_system(actor, event)?;
                if self.character.is_none() {
                    return Err(Rejection::NoSourceImage);
                }
                if style_tokens.trim().is_empty() {
                    return Err(Rejection::IllegalTransition("style tokens are empty".into()));
                }
            }
            CharacterConfirmed { name } => {
                if self.phase != SessionPhase::CharacterConstruction {
                    return Err(self.wrong_phase(event));
                }
                self.require_member(actor)?;
                if self.character.as_ref().and_then(|c| c.avatar.as_ref()).is_none() {
                    return Err(Rejection::NoAvatar);
                }
                validate_name(name).map_err(Rejection::InvalidName)?;
            }
            InquiryPresented { chapter, text, .. } => {
                self.in_chapter(event, *chapter, ChapterStep::Inquiry)?;
                self.require_system(actor, event)?;
                if text.trim().is_empty() {
                    return Err(Rejection::IllegalTransition("inquiry text is empty".into()));
                }
            }
            InputSubmitted { chapter, text } => {
                self.in_chapter(event, *chapter, ChapterStep::AwaitingInput)?;
                let owner = turn_for(*chapter);
                let Actor::Participant(id) = actor else {
                    return Err(Rejection::WrongActor(format!(
                        "chapter {chapter} input must come from the {owner} player"
                    )));
                };
                let participant = self
                    .participant(id)
                    .ok_or_else(|| Rejection::UnknownParticipant(id.clone()))?;
                if participant.role != Some(owner) {
                    return Err(Rejection::WrongActor(format!(
                        "chapter {chapter} belongs to the {owner} player"
                    )));
                }
                validate_player_input(text).map_err(Rejection::InvalidInput)?;
            }
            SegmentGenerated { segment } => {
                self.in_chapter(event, segment.chapter_index, ChapterStep::Generating)?;
                self.require_system(actor, event)?;
                let chapter = segment.chapter_index;
                if !self.segments.keys().copied().eq((1..chapter.get()).filter_map(ChapterIndex::new)) {
                    return Err(Rejection::InvalidSegment(format!(
                        "chapter {chapter} cannot commit before chapters 1..{} are complete",
                        chapter.get()
                    )));
                }
                segment.validate().map_err(Rejection::InvalidSegment)?;
                if self.pending_input.as_deref() != Some(segment.player_input.as_str()) {
                    return Err(Rejection::InvalidSegment(
                        "segment was generated from different input".into(),
                    ));
                }
            }
            GenerationFailed { chapter, .. } => {
                self.in_chapter(event, *chapter, ChapterStep::Generating)?;
                self.require_system(actor, event)?;
            }
            RegenerationRequested { chapter } | SegmentAccepted { chapter } => {
                self.in_chapter(event, *chapter, ChapterStep::Review)?;
                self.require_role_holder(actor, event)?;
            }
            SessionClosed => {
                if self.phase != SessionPhase::Presentation {
                    return Err(self.wrong_phase(event));
                }
                self.require_member(actor)?;
            }
        }
        Ok(())
    }

    // Only called after `check` has accepted the event.
    fn transition(&mut self, event: &SessionEvent) {
        use SessionEvent::*;

        match event {
            Created { .. } => self.phase = SessionPhase::Setup,
            ScenarioSelected { scenario } => {
                self.scenario = Some(scenario.clone());
                self.phase = SessionPhase::RoleAssignment;
            }
            ParticipantJoined {
                participant,
                token_digest,
            } => {
                self.participants.push(participant.clone());
                if let Some(digest) = token_digest {
                    self.token_digests.insert(participant.id.clone(), digest.clone());
                }
            }
            RoleAssigned { participant, role } => {
                if let Some(p) = self.participants.iter_mut().find(|p| &p.id == participant) {
                    p.role = Some(*role);
                }
                if Role::ALL.iter().all(|r| self.holder_of(*r).is_some()) {
                    self.phase = SessionPhase::CharacterConstruction;
                }
            }
            SourceImageIngested { image } => {
                self.character = Some(CharacterProfile::from_source(image.clone()));
            }
            AvatarGenerated {
                avatar,
                style_tokens,
            } => {
                if let Some(character) = &mut self.character {
                    character.avatar = Some(avatar.clone());
                    character.style_tokens = style_tokens.clone();
                }
            }
            CharacterConfirmed { name } => {
                if let Some(character) = &mut self.character {
                    character.name = name.trim().to_string();
                    character.confirmed = true;
                }
                self.phase = SessionPhase::Chapter {
                    chapter: ChapterIndex::FIRST,
                    step: ChapterStep::Inquiry,
                };
            }
            InquiryPresented {
                chapter,
                text,
                source,
            } => {
                self.inquiry = Some(Inquiry {
                    chapter: *chapter,
                    text: text.clone(),
                    source: *source,
                });
                self.phase = SessionPhase::Chapter {
                    chapter: *chapter,
                    step: ChapterStep::AwaitingInput,
                };
            }
            InputSubmitted { chapter, text } => {
                self.pending_input = Some(text.trim().to_string());
                self.phase = SessionPhase::Chapter {
                    chapter: *chapter,
                    step: ChapterStep::Generating,
                };
            }
            SegmentGenerated { segment } => {
                let chapter = segment.chapter_index;
                self.segments.insert(chapter, segment.clone());
                self.phase = SessionPhase::Chapter {
                    chapter,
                    step: ChapterStep::Review,
                };
            }
            GenerationFailed { chapter, .. } => {
                self.pending_input = None;
                self.phase = SessionPhase::Chapter {
                    chapter: *chapter,
                    step: ChapterStep::AwaitingInput,
                };
            }
            RegenerationRequested { chapter } => {
                if let Some(segment) = self.segments.remove(chapter) {
                    self.pending_input = Some(segment.player_input);
                }
                *self.regenerations.entry(*chapter).or_insert(0) += 1;
                self.phase = SessionPhase::Chapter {
                    chapter: *chapter,
                    step: ChapterStep::Generating,
                };
            }
            SegmentAccepted { chapter } => {
                self.pending_input = None;
                self.inquiry = None;
                self.phase = match chapter.next() {
                    Some(next) => SessionPhase::Chapter {
                        chapter: next,
                        step: ChapterStep::Inquiry,
                    },
                    None => SessionPhase::Presentation,
                };
            }
            SessionClosed => self.phase = SessionPhase::Closed,
        }
    }

    /// Selects a registered scenario by id.
    pub fn select_scenario(
        &mut self,
        registry: &ScenarioRegistry,
        scenario_id: &str,
        actor: Actor,
        at: DateTime<Utc>,
    ) -> Result<&LogEntry, Rejection> {
        if self.phase != SessionPhase::Setup {
            return Err(Rejection::WrongPhase {
                phase: self.phase,
                event: "scenario_selected".into(),
            });
        }
        let scenario = registry
            .get(scenario_id)
            .ok_or_else(|| Rejection::UnknownScenario(scenario_id.to_string()))?
            .clone();
        self.apply(actor, SessionEvent::ScenarioSelected { scenario }, at)
    }

    /// Registers a participant under the next free `pN` id.
    pub fn join(
        &mut self,
        display_name: &str,
        is_facilitator: bool,
        token_digest: Option<String>,
        actor: Actor,
        at: DateTime<Utc>,
    ) -> Result<ParticipantId, Rejection> {
        let id = ParticipantId::new(format!("p{}", self.participants.len() + 1));
        let participant = Participant {
            id: id.clone(),
            display_name: display_name.trim().to_string(),
            role: None,
            is_facilitator,
        };
        self.apply(
            actor,
            SessionEvent::ParticipantJoined {
                participant,
                token_digest,
            },
            at,
        )?;
        Ok(id)
    }

    pub fn assign_role(
        &mut self,
        participant: &ParticipantId,
        role: Role,
        actor: Actor,
        at: DateTime<Utc>,
    ) -> Result<&LogEntry, Rejection> {
        self.apply(
            actor,
            SessionEvent::RoleAssigned {
                participant: participant.clone(),
                role,
            },
            at,
        )
    }
}
