//! The service core: sessions, jobs, persistence and generation together.
//!
//! Each session has one writer lock. Every mutation (including job results)
//! takes it, applies one event, makes the log entry durable and then
//! publishes a new read snapshot. Readers never wait on the writer.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use thiserror::Error;
use tokio::task::JoinHandle;

use crate::backend::{AgentKind, ImageRef, MediaType, Trace};
use crate::blob::{BlobError, BlobStore};
use crate::character::{inspect_source, CharacterError, DEFAULT_STYLE_TOKENS};
use crate::export::{export_story, ExportError, ExportFormat};
use crate::ids::{sha256_hex, Clock, IdSource, JobId, ParticipantId, RandomIds, SessionId, SystemClock};
use crate::jobs::{JobKind, JobRegistry, JobResult, JobState, JobStatus};
use crate::narrative::ChapterIndex;
use crate::pipeline::{ChapterGenerator, GenerationContext, PipelineError};
use crate::session::{
    Actor, ChapterStep, Rejection, Role, ScenarioRegistry, Session, SessionEvent, SessionPhase,
};
use crate::store::{SessionStore, StoreError};

pub struct EngineConfig {
    pub data_dir: PathBuf,
    pub scenarios: ScenarioRegistry,
    pub generator: ChapterGenerator,
    pub clock: Arc<dyn Clock>,
    pub ids: Arc<dyn IdSource>,
    /// Style descriptor fixed into every character profile.
    pub style_tokens: String,
}

impl EngineConfig {
    /// Mock backends, built-in scenarios, wall clock and random ids.
    pub fn mock(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            scenarios: ScenarioRegistry::defaults(),
            generator: ChapterGenerator::mock(),
            clock: Arc::new(SystemClock),
            ids: Arc::new(RandomIds),
            style_tokens: DEFAULT_STYLE_TOKENS.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{rejection}")]
    Rejected { rejection: Rejection, phase: SessionPhase },
    #[error("{source}")]
    Character { source: CharacterError, phase: SessionPhase },
    #[error("session `{0}` not found")]
    SessionNotFound(SessionId),
    #[error("job `{0}` not found")]
    JobNotFound(JobId),
    #[error("image `{0}` not found")]
    ImageNotFound(String),
    #[error("missing or invalid participant token")]
    Unauthorized,
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("the service is shutting down")]
    ShuttingDown,
}

impl From<BlobError> for EngineError {
    fn from(e: BlobError) -> Self {
        EngineError::Store(StoreError::Blob(e))
    }
}

impl EngineError {
    /// Stable wire code; session rejections keep their own names.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Rejected { rejection, .. } => rejection.code(),
            EngineError::Character { source, .. } => source.code(),
            EngineError::SessionNotFound(_) => "SessionNotFound",
            EngineError::JobNotFound(_) => "JobNotFound",
            EngineError::ImageNotFound(_) => "ImageNotFound",
            EngineError::Unauthorized => "Unauthorized",
            EngineError::Export(e) => e.code(),
            EngineError::Store(e) => e.code(),
            EngineError::Pipeline(_) => "InvalidRequest",
            EngineError::ShuttingDown => "ShuttingDown",
        }
    }

    pub fn phase(&self) -> Option<SessionPhase> {
        match self {
            EngineError::Rejected { phase, .. } | EngineError::Character { phase, .. } => Some(*phase),
            EngineError::Export(ExportError::WrongPhase(phase)) => Some(*phase),
            _ => None,
        }
    }
}

struct SessionSlot {
    writer: tokio::sync::Mutex<Session>,
    snapshot: RwLock<Arc<Session>>,
}

impl SessionSlot {
    fn new(session: Session) -> Self {
        Self {
            snapshot: RwLock::new(Arc::new(session.clone())),
            writer: tokio::sync::Mutex::new(session),
        }
    }

    fn snapshot(&self) -> Arc<Session> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }
}

struct Inner {
    config: EngineConfig,
    store: SessionStore,
    sessions: RwLock<HashMap<SessionId, Arc<SessionSlot>>>,
    images: RwLock<HashMap<String, SessionId>>,
    jobs: JobRegistry,
    latest_job: RwLock<HashMap<SessionId, JobId>>,
    tasks: Mutex<Vec<JoinHandle<()>>>,
    shutting_down: AtomicBool,
}

#[derive(Clone)]
pub struct Engine {
    inner: Arc<Inner>,
}

impl Engine {
    /// Opens the data directory and recovers every stored session by log
    /// replay. Chapters that were generating when the service stopped are
    /// generated again; chapters waiting for their question get it.
    pub async fn open(config: EngineConfig) -> Result<Self, EngineError> {
        let store = SessionStore::open(&config.data_dir)?;
        let engine = Self {
            inner: Arc::new(Inner {
                config,
                store,
                sessions: RwLock::new(HashMap::new()),
                images: RwLock::new(HashMap::new()),
                jobs: JobRegistry::default(),
                latest_job: RwLock::new(HashMap::new()),
                tasks: Mutex::new(Vec::new()),
                shutting_down: AtomicBool::new(false),
            }),
        };

        let mut resumable = Vec::new();
        for id in engine.inner.store.list()? {
            let session = match engine.inner.store.load(&id) {
                Ok(s) => s,
                Err(StoreError::NotFound(_)) => continue,
                Err(e) => {
                    tracing::error!(session = %id, error = %e, "skipping unreadable session");
                    continue;
                }
            };
            for address in engine.inner.store.blobs(&id)?.addresses()? {
                engine.index_image(&address, &id);
            }
            resumable.push((id.clone(), session.phase));
            engine.insert_slot(session);
        }

        for (id, phase) in resumable {
            match phase {
                SessionPhase::Chapter {
                    chapter,
                    step: ChapterStep::Generating,
                } => {
                    tracing::info!(session = %id, %chapter, "resuming interrupted chapter generation");
                    engine.spawn_chapter_job(id, chapter);
                }
                SessionPhase::Chapter {
                    step: ChapterStep::Inquiry,
                    ..
                } => {
                    let slot = engine.slot(&id)?;
                    let mut guard = slot.writer.lock().await;
                    engine.present_inquiry(&slot, &mut guard).await?;
                }
                _ => {}
            }
        }
        Ok(engine)
    }

    pub fn scenarios(&self) -> &ScenarioRegistry {
        &self.inner.config.scenarios
    }

    pub fn generator(&self) -> &ChapterGenerator {
        &self.inner.config.generator
    }

    fn now(&self) -> chrono::DateTime<chrono::Utc> {
        self.inner.config.clock.now()
    }

    fn insert_slot(&self, session: Session) -> Arc<SessionSlot> {
        let id = session.id.clone();
        let slot = Arc::new(SessionSlot::new(session));
        self.inner
            .sessions
            .write()
            .expect("session table poisoned")
            .insert(id, slot.clone());
        slot
    }

    fn slot(&self, id: &SessionId) -> Result<Arc<SessionSlot>, EngineError> {
        self.inner
            .sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::SessionNotFound(id.clone()))
    }

    fn index_image(&self, address: &str, session: &SessionId) {
        self.inner
            .images
            .write()
            .expect("image index poisoned")
            .entry(address.to_string())
            .or_insert_with(|| session.clone());
    }

    fn ensure_running(&self) -> Result<(), EngineError> {
        if self.inner.shutting_down.load(Ordering::SeqCst) {
            Err(EngineError::ShuttingDown)
        } else {
            Ok(())
        }
    }

    /// Applies one event under the writer lock, persists it and publishes the
    /// new snapshot. If persisting fails the in-memory session is restored.
    fn commit(
        &self,
        slot: &SessionSlot,
        session: &mut Session,
        actor: Actor,
        event: SessionEvent,
    ) -> Result<(), EngineError> {
        let backup = session.clone();
        if let Err(rejection) = session.apply(actor, event, self.now()) {
            return Err(EngineError::Rejected {
                rejection,
                phase: session.phase,
            });
        }
        if let Err(e) = self.inner.store.persist(session) {
            *session = backup;
            return Err(e.into());
        }
        *slot.snapshot.write().expect("snapshot lock poisoned") = Arc::new(session.clone());
        Ok(())
    }

    fn rejected(session: &Session, rejection: Rejection) -> EngineError {
        EngineError::Rejected {
            rejection,
            phase: session.phase,
        }
    }

    /// Presents the chapter question if the session is waiting for one.
    async fn present_inquiry(&self, slot: &SessionSlot, session: &mut Session) -> Result<(), EngineError> {
        let Some((chapter, ChapterStep::Inquiry)) = session.chapter_step() else {
            return Ok(());
        };
        let scenario = session.scenario.clone().ok_or(PipelineError::NoScenario)?;
        let character = session.character.clone().ok_or(PipelineError::UnconfirmedCharacter)?;
        let (text, source) = self
            .generator()
            .question(&session.id, chapter, &scenario, &character)
            .await?;
        self.commit(
            slot,
            session,
            Actor::System,
            SessionEvent::InquiryPresented { chapter, text, source },
        )
    }

    // ----- operations -----

    pub async fn create_session(&self) -> Result<Arc<Session>, EngineError> {
        self.ensure_running()?;
        let id = self.inner.config.ids.session_id();
        let session = Session::create(id, self.now());
        self.inner.store.persist(&session)?;
        Ok(self.insert_slot(session).snapshot())
    }

    pub fn snapshot(&self, id: &SessionId) -> Result<Arc<Session>, EngineError> {
        Ok(self.slot(id)?.snapshot())
    }

    /// Most recent avatar or chapter job started for the session.
    pub fn latest_job(&self, id: &SessionId) -> Option<JobStatus> {
        let job = self.inner.latest_job.read().expect("job index poisoned").get(id).cloned()?;
        self.inner.jobs.get(&job)
    }

    pub fn job(&self, id: &JobId) -> Result<JobStatus, EngineError> {
        self.inner.jobs.get(id).ok_or_else(|| EngineError::JobNotFound(id.clone()))
    }

    /// Resolves a bearer token to the participant it was issued to.
    pub fn authenticate(&self, id: &SessionId, token: &str) -> Result<Actor, EngineError> {
        let session = self.snapshot(id)?;
        let digest = sha256_hex(token.as_bytes());
        session
            .token_digests
            .iter()
            .find(|(_, d)| **d == digest)
            .map(|(p, _)| Actor::Participant(p.clone()))
            .ok_or(EngineError::Unauthorized)
    }

    pub async fn select_scenario(
        &self,
        id: &SessionId,
        scenario_id: &str,
        actor: Actor,
    ) -> Result<Arc<Session>, EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let mut session = slot.writer.lock().await;
        if session.phase != SessionPhase::Setup {
            return Err(Self::rejected(
                &session,
                Rejection::WrongPhase {
                    phase: session.phase,
                    event: "scenario_selected".into(),
                },
            ));
        }
        let scenario = self
            .scenarios()
            .get(scenario_id)
            .cloned()
            .ok_or_else(|| Self::rejected(&session, Rejection::UnknownScenario(scenario_id.into())))?;
        self.commit(&slot, &mut session, actor, SessionEvent::ScenarioSelected { scenario })?;
        Ok(slot.snapshot())
    }

    /// Registers a participant and returns their id and capability token.
    pub async fn join(
        &self,
        id: &SessionId,
        display_name: &str,
        is_facilitator: bool,
        actor: Actor,
    ) -> Result<(ParticipantId, String), EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let mut session = slot.writer.lock().await;
        let token = self.inner.config.ids.token();
        let participant = ParticipantId::new(format!("p{}", session.participants.len() + 1));
        let event = SessionEvent::ParticipantJoined {
            participant: crate::session::Participant {
                id: participant.clone(),
                display_name: display_name.trim().to_string(),
                role: None,
                is_facilitator,
            },
            token_digest: Some(sha256_hex(token.as_bytes())),
        };
        self.commit(&slot, &mut session, actor, event)?;
        Ok((participant, token))
    }

    pub async fn assign_role(
        &self,
        id: &SessionId,
        participant: &ParticipantId,
        role: Role,
        actor: Actor,
    ) -> Result<Arc<Session>, EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let mut session = slot.writer.lock().await;
        let event = SessionEvent::RoleAssigned {
            participant: participant.clone(),
            role,
        };
        self.commit(&slot, &mut session, actor, event)?;
        Ok(slot.snapshot())
    }

    /// Stores an uploaded selfie or sketch as the character's source image.
    pub async fn ingest_source(
        &self,
        id: &SessionId,
        bytes: &[u8],
        declared_media: Option<&str>,
        actor: Actor,
    ) -> Result<ImageRef, EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let mut session = slot.writer.lock().await;
        if session.phase != SessionPhase::CharacterConstruction {
            return Err(Self::rejected(
                &session,
                Rejection::WrongPhase {
                    phase: session.phase,
                    event: "source_image_ingested".into(),
                },
            ));
        }
        let (media_type, width, height) =
            inspect_source(bytes, declared_media).map_err(|source| EngineError::Character {
                source,
                phase: session.phase,
            })?;
        let blobs = self.inner.store.blobs(id)?;
        let image = ImageRef {
            content_address: blobs.put(bytes)?,
            media_type,
            width,
            height,
        };
        self.index_image(&image.content_address, id);
        self.commit(
            &slot,
            &mut session,
            actor,
            SessionEvent::SourceImageIngested { image: image.clone() },
        )?;
        Ok(image)
    }

    /// Starts stylizing the current source image into an avatar.
    pub async fn start_avatar(&self, id: &SessionId, actor: Actor) -> Result<JobStatus, EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let session = slot.writer.lock().await;
        if session.phase != SessionPhase::CharacterConstruction {
            return Err(Self::rejected(
                &session,
                Rejection::WrongPhase {
                    phase: session.phase,
                    event: "avatar_generated".into(),
                },
            ));
        }
        if let Actor::Participant(p) = &actor {
            if session.participant(p).is_none() {
                return Err(Self::rejected(&session, Rejection::UnknownParticipant(p.clone())));
            }
        }
        let source = session
            .character
            .as_ref()
            .map(|c| c.source_image.clone())
            .ok_or_else(|| Self::rejected(&session, Rejection::NoSourceImage))?;
        drop(session);

        let job_id = self.inner.config.ids.job_id();
        let status = self.register_job(&job_id, id, JobKind::Avatar);
        let engine = self.clone();
        let session_id = id.clone();
        self.track(tokio::spawn(async move {
            engine.run_avatar_job(job_id, session_id, source).await;
        }));
        Ok(status)
    }

    pub async fn confirm_character(
        &self,
        id: &SessionId,
        name: &str,
        actor: Actor,
    ) -> Result<Arc<Session>, EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let mut session = slot.writer.lock().await;
        self.commit(
            &slot,
            &mut session,
            actor,
            SessionEvent::CharacterConfirmed { name: name.into() },
        )?;
        self.present_inquiry(&slot, &mut session).await?;
        Ok(slot.snapshot())
    }

    /// Records the owning player's input and starts generating the chapter.
    pub async fn submit_input(
        &self,
        id: &SessionId,
        chapter: ChapterIndex,
        text: &str,
        actor: Actor,
    ) -> Result<JobStatus, EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let mut session = slot.writer.lock().await;
        self.commit(
            &slot,
            &mut session,
            actor,
            SessionEvent::InputSubmitted {
                chapter,
                text: text.into(),
            },
        )?;
        Ok(self.spawn_chapter_job(id.clone(), chapter))
    }

    pub async fn accept(&self, id: &SessionId, chapter: ChapterIndex, actor: Actor) -> Result<Arc<Session>, EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let mut session = slot.writer.lock().await;
        self.commit(&slot, &mut session, actor, SessionEvent::SegmentAccepted { chapter })?;
        self.present_inquiry(&slot, &mut session).await?;
        Ok(slot.snapshot())
    }

    /// Discards the chapter's segment and generates it again from the same input.
    pub async fn regenerate(&self, id: &SessionId, chapter: ChapterIndex, actor: Actor) -> Result<JobStatus, EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let mut session = slot.writer.lock().await;
        self.commit(&slot, &mut session, actor, SessionEvent::RegenerationRequested { chapter })?;
        Ok(self.spawn_chapter_job(id.clone(), chapter))
    }

    pub async fn close(&self, id: &SessionId, actor: Actor) -> Result<Arc<Session>, EngineError> {
        self.ensure_running()?;
        let slot = self.slot(id)?;
        let mut session = slot.writer.lock().await;
        self.commit(&slot, &mut session, actor, SessionEvent::SessionClosed)?;
        Ok(slot.snapshot())
    }

    pub fn export(&self, id: &SessionId, format: ExportFormat) -> Result<Vec<u8>, EngineError> {
        let session = self.snapshot(id)?;
        let blobs = self.inner.store.blobs(id)?;
        Ok(export_story(&session, &blobs, format)?)
    }

    pub fn blobs(&self, id: &SessionId) -> Result<BlobStore, EngineError> {
        Ok(self.inner.store.blobs(id)?)
    }

    /// Image bytes by content address, from whichever session stored them.
    pub fn image(&self, address: &str) -> Result<(Vec<u8>, MediaType), EngineError> {
        let owner = self
            .inner
            .images
            .read()
            .expect("image index poisoned")
            .get(address)
            .cloned()
            .ok_or_else(|| EngineError::ImageNotFound(address.into()))?;
        let (bytes, media) = self.inner.store.blobs(&owner)?.get_image(address).map_err(|e| match e {
            BlobError::NotFound(a) | BlobError::InvalidAddress(a) => EngineError::ImageNotFound(a),
            other => other.into(),
        })?;
        let media = media.ok_or_else(|| EngineError::ImageNotFound(address.into()))?;
        Ok((bytes, media))
    }

    // ----- jobs -----

    fn register_job(&self, job_id: &JobId, session: &SessionId, kind: JobKind) -> JobStatus {
        let status = self.inner.jobs.create(job_id.clone(), session.clone(), kind);
        self.inner
            .latest_job
            .write()
            .expect("job index poisoned")
            .insert(session.clone(), job_id.clone());
        status
    }

    fn track(&self, handle: JoinHandle<()>) {
        let mut tasks = self.inner.tasks.lock().expect("task list poisoned");
        tasks.retain(|t| !t.is_finished());
        tasks.push(handle);
    }

    fn spawn_chapter_job(&self, session_id: SessionId, chapter: ChapterIndex) -> JobStatus {
        let job_id = self.inner.config.ids.job_id();
        let status = self.register_job(&job_id, &session_id, JobKind::Chapter);
        let engine = self.clone();
        self.track(tokio::spawn(async move {
            engine.run_chapter_job(job_id, session_id, chapter).await;
        }));
        status
    }

    fn fail_job(&self, job_id: &JobId, error: &str, message: String) {
        self.inner.jobs.advance(
            job_id,
            JobState::Failed {
                error: error.into(),
                message,
            },
            self.now(),
        );
    }

    async fn run_avatar_job(&self, job_id: JobId, session_id: SessionId, source: ImageRef) {
        self.inner.jobs.advance(&job_id, JobState::Running, self.now());
        let blobs = match self.inner.store.blobs(&session_id) {
            Ok(b) => b,
            Err(e) => return self.fail_job(&job_id, "IoError", e.to_string()),
        };
        let trace = Trace {
            session_id: session_id.to_string(),
            chapter: 0,
            agent: AgentKind::Drawing,
        };
        let style = &self.inner.config.style_tokens;
        let result = self
            .generator()
            .backends
            .image
            .stylize_avatar(&source, style, &blobs, &trace)
            .await;
        let avatar = match result {
            Ok(a) => a,
            Err(e) => return self.fail_job(&job_id, e.kind(), e.to_string()),
        };
        self.index_image(&avatar.content_address, &session_id);

        let Ok(slot) = self.slot(&session_id) else {
            return self.fail_job(&job_id, "SessionNotFound", session_id.to_string());
        };
        let mut session = slot.writer.lock().await;
        if session.character.as_ref().map(|c| &c.source_image) != Some(&source) {
            return self.fail_job(&job_id, "Superseded", "a newer source image was uploaded".into());
        }
        let event = SessionEvent::AvatarGenerated {
            avatar: avatar.clone(),
            style_tokens: style.clone(),
        };
        match self.commit(&slot, &mut session, Actor::System, event) {
            Ok(()) => {
                self.inner.jobs.advance(
                    &job_id,
                    JobState::Done {
                        result: JobResult::Avatar { avatar },
                    },
                    self.now(),
                );
            }
            Err(e) => self.fail_job(&job_id, e.code(), e.to_string()),
        }
    }

    async fn run_chapter_job(&self, job_id: JobId, session_id: SessionId, chapter: ChapterIndex) {
        self.inner.jobs.advance(&job_id, JobState::Running, self.now());
        let Ok(slot) = self.slot(&session_id) else {
            return self.fail_job(&job_id, "SessionNotFound", session_id.to_string());
        };
        let snapshot = slot.snapshot();
        let context = match GenerationContext::from_session(&snapshot, chapter) {
            Ok(c) => c,
            Err(e) => return self.fail_job(&job_id, "InvalidRequest", e.to_string()),
        };
        let regenerations = snapshot.regenerations.get(&chapter).copied().unwrap_or(0);
        let blobs = match self.inner.store.blobs(&session_id) {
            Ok(b) => b,
            Err(e) => return self.fail_job(&job_id, "IoError", e.to_string()),
        };

        let result = self
            .generator()
            .generate(
                &session_id,
                chapter,
                &context,
                regenerations,
                &blobs,
                self.inner.config.clock.as_ref(),
            )
            .await;

        let mut session = slot.writer.lock().await;
        if session.phase
            != (SessionPhase::Chapter {
                chapter,
                step: ChapterStep::Generating,
            })
        {
            return self.fail_job(&job_id, "Superseded", format!("session left chapter {chapter} generation"));
        }
        match result {
            Ok(segment) => {
                for image in &segment.illustrations {
                    self.index_image(&image.content_address, &session_id);
                }
                match self.commit(&slot, &mut session, Actor::System, SessionEvent::SegmentGenerated { segment }) {
                    Ok(()) => {
                        self.inner.jobs.advance(
                            &job_id,
                            JobState::Done {
                                result: JobResult::Segment { chapter },
                            },
                            self.now(),
                        );
                    }
                    Err(e) => self.fail_job(&job_id, e.code(), e.to_string()),
                }
            }
            Err(failure) => {
                tracing::warn!(session = %session_id, %chapter, error = %failure, "chapter generation failed");
                let event = SessionEvent::GenerationFailed {
                    chapter,
                    kind: failure.kind().to_string(),
                    message: failure.to_string(),
                };
                if let Err(e) = self.commit(&slot, &mut session, Actor::System, event) {
                    tracing::error!(session = %session_id, error = %e, "could not record generation failure");
                }
                self.fail_job(&job_id, failure.code(), failure.to_string());
            }
        }
    }

    /// Stops accepting mutations, lets running jobs finish within `grace`,
    /// then aborts the rest and marks them `Failed(Shutdown)`.
    pub async fn shutdown(&self, grace: Duration) {
        self.inner.shutting_down.store(true, Ordering::SeqCst);
        let handles: Vec<_> = std::mem::take(&mut *self.inner.tasks.lock().expect("task list poisoned"));
        let aborts: Vec<_> = handles.iter().map(|h| h.abort_handle()).collect();
        if tokio::time::timeout(grace, futures::future::join_all(handles)).await.is_err() {
            for abort in &aborts {
                abort.abort();
            }
        }

        for job_id in self.inner.jobs.unfinished() {
            let Some(job) = self.inner.jobs.get(&job_id) else { continue };
            self.fail_job(&job_id, "Shutdown", "the service stopped before the job finished".into());
            if job.kind != JobKind::Chapter {
                continue;
            }
            let Ok(slot) = self.slot(&job.session_id) else { continue };
            let mut session = slot.writer.lock().await;
            if let Some((chapter, ChapterStep::Generating)) = session.chapter_step() {
                let event = SessionEvent::GenerationFailed {
                    chapter,
                    kind: "Shutdown".into(),
                    message: "the service stopped before the chapter finished".into(),
                };
                if let Err(e) = self.commit(&slot, &mut session, Actor::System, event) {
                    tracing::error!(session = %job.session_id, error = %e, "could not record shutdown");
                }
            }
        }
    }
}
