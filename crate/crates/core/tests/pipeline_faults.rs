mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use common::*;
use triadtale_core::backend::mock::{MockImageModel, MockTextModel};
use triadtale_core::backend::{
    AgentKind, BackendDescriptor, BackendError, BackendKind, Backends, GeneratedImage, ImageBackend, ImageModel,
    ImageRef, ImageRequest, TextBackend, TextModel, TextRequest, Trace,
};
use triadtale_core::jobs::JobState;
use triadtale_core::pipeline::{ChapterGenerator, PipelineSettings};
use triadtale_core::session::{ChapterStep, SessionEvent};
use triadtale_core::{ChapterIndex, Engine, Role, SessionPhase};

/// Wraps the mock writer; answers with `short` paragraphs for the first `failures` story calls.
struct ShortStories {
    inner: MockTextModel,
    failures: usize,
    story_calls: AtomicUsize,
}

#[async_trait]
impl TextModel for ShortStories {
    async fn complete(&self, request: &TextRequest) -> Result<String, BackendError> {
        if request.trace.agent == AgentKind::Writing {
            let n = self.story_calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                return Ok("One.\n\nTwo.\n\nThree.".into());
            }
        }
        self.inner.complete(request).await
    }
}

/// Never answers story requests.
struct Stalled;

#[async_trait]
impl TextModel for Stalled {
    async fn complete(&self, _: &TextRequest) -> Result<String, BackendError> {
        tokio::time::sleep(Duration::from_secs(3600)).await;
        Err(BackendError::Timeout)
    }
}

/// Records every illustration request before delegating to the mock.
#[derive(Default)]
struct Recording {
    inner: MockImageModel,
    requests: Mutex<Vec<ImageRequest>>,
}

#[async_trait]
impl ImageModel for Recording {
    async fn render(&self, request: &ImageRequest, reference: Option<&[u8]>) -> Result<GeneratedImage, BackendError> {
        self.requests.lock().unwrap().push(request.clone());
        self.inner.render(request, reference).await
    }

    async fn stylize(
        &self,
        source: &[u8],
        source_ref: &ImageRef,
        style_tokens: &str,
        trace: &Trace,
    ) -> Result<GeneratedImage, BackendError> {
        self.inner.stylize(source, source_ref, style_tokens, trace).await
    }
}

fn generator(text: Arc<dyn TextModel>, image: Arc<dyn ImageModel>, settings: PipelineSettings) -> ChapterGenerator {
    ChapterGenerator::new(
        Backends {
            text: TextBackend::new(BackendDescriptor::mock("text", BackendKind::Text), text),
            image: ImageBackend::new(BackendDescriptor::mock("image", BackendKind::Image), image),
        },
        Default::default(),
        settings,
    )
}

#[tokio::test]
async fn two_short_stories_fail_the_chapter() {
    let dir = tempfile::tempdir().unwrap();
    let text = Arc::new(ShortStories {
        inner: MockTextModel::default(),
        failures: 2,
        story_calls: AtomicUsize::new(0),
    });
    let engine = Engine::open(deterministic_config(
        dir.path(),
        generator(text.clone(), Arc::new(MockImageModel::default()), PipelineSettings::default()),
    ))
    .await
    .unwrap();
    let players = start_session(&engine, "high_school").await;
    let job = engine
        .submit_input(&players.session, ChapterIndex::FIRST, INPUTS[0], players.actor(Role::Protagonist))
        .await
        .unwrap();
    let status = wait_for_job(&engine, &job).await;
    assert!(
        matches!(&status.state, JobState::Failed { error, .. } if error == "BackendFailure"),
        "{status:?}"
    );
    assert_eq!(text.story_calls.load(Ordering::SeqCst), 2);

    let session = engine.snapshot(&players.session).unwrap();
    assert_eq!(
        session.phase,
        SessionPhase::Chapter {
            chapter: ChapterIndex::FIRST,
            step: ChapterStep::AwaitingInput
        }
    );
    assert!(session.segments.is_empty());
    assert!(matches!(
        &session.event_log.last().unwrap().event,
        SessionEvent::GenerationFailed { kind, .. } if kind == "WrongParagraphCount"
    ));

    // the third call succeeds, so resubmitting recovers
    let job = engine
        .submit_input(&players.session, ChapterIndex::FIRST, INPUTS[0], players.actor(Role::Protagonist))
        .await
        .unwrap();
    assert!(matches!(wait_for_job(&engine, &job).await.state, JobState::Done { .. }));
}

#[tokio::test]
async fn one_short_story_is_retried_silently() {
    let dir = tempfile::tempdir().unwrap();
    let text = Arc::new(ShortStories {
        inner: MockTextModel::default(),
        failures: 1,
        story_calls: AtomicUsize::new(0),
    });
    let engine = Engine::open(deterministic_config(
        dir.path(),
        generator(text.clone(), Arc::new(MockImageModel::default()), PipelineSettings::default()),
    ))
    .await
    .unwrap();
    let players = start_session(&engine, "high_school").await;
    let job = engine
        .submit_input(&players.session, ChapterIndex::FIRST, INPUTS[0], players.actor(Role::Protagonist))
        .await
        .unwrap();
    assert!(matches!(wait_for_job(&engine, &job).await.state, JobState::Done { .. }));
    assert_eq!(text.story_calls.load(Ordering::SeqCst), 2);
    let session = engine.snapshot(&players.session).unwrap();
    assert_eq!(session.segments[&ChapterIndex::FIRST].paragraphs.len(), 4);
}

#[tokio::test]
async fn stalled_backend_times_out_without_counting_a_regeneration() {
    let dir = tempfile::tempdir().unwrap();
    let settings = PipelineSettings {
        chapter_timeout_ms: 200,
        ..Default::default()
    };
    let image = Arc::new(MockImageModel::default());
    let healthy = Engine::open(deterministic_config(
        dir.path(),
        generator(Arc::new(MockTextModel::default()), image.clone(), settings.clone()),
    ))
    .await
    .unwrap();
    let players = start_session(&healthy, "university").await;
    let job = healthy
        .submit_input(&players.session, ChapterIndex::FIRST, INPUTS[0], players.actor(Role::Protagonist))
        .await
        .unwrap();
    wait_for_job(&healthy, &job).await;
    healthy.shutdown(Duration::from_secs(1)).await;
    drop(healthy);

    let engine = Engine::open(deterministic_config(dir.path(), generator(Arc::new(Stalled), image, settings)))
        .await
        .unwrap();
    let job = engine
        .regenerate(&players.session, ChapterIndex::FIRST, players.actor(Role::Challenge))
        .await
        .unwrap();
    let status = wait_for_job(&engine, &job).await;
    assert!(
        matches!(&status.state, JobState::Failed { error, .. } if error == "Timeout"),
        "{status:?}"
    );
    let session = engine.snapshot(&players.session).unwrap();
    assert!(session.segments.is_empty());
    assert_eq!(session.pending_input, None);
    assert_eq!(session.regenerations.get(&ChapterIndex::FIRST).copied().unwrap_or(0), 1);
    assert_eq!(
        session.phase,
        SessionPhase::Chapter {
            chapter: ChapterIndex::FIRST,
            step: ChapterStep::AwaitingInput
        }
    );
    assert!(matches!(
        &session.event_log.last().unwrap().event,
        SessionEvent::GenerationFailed { kind, .. } if kind == "Timeout"
    ));
}

#[tokio::test]
async fn every_illustration_request_references_the_avatar() {
    let dir = tempfile::tempdir().unwrap();
    let image = Arc::new(Recording::default());
    let engine = Engine::open(deterministic_config(
        dir.path(),
        generator(Arc::new(MockTextModel::default()), image.clone(), PipelineSettings::default()),
    ))
    .await
    .unwrap();
    let players = start_session(&engine, "early_career").await;
    play_all_chapters(&engine, &players).await;

    let session = engine.snapshot(&players.session).unwrap();
    let character = session.character.as_ref().unwrap();
    let avatar = character.avatar.clone().unwrap();
    let requests = image.requests.lock().unwrap();
    assert_eq!(requests.len(), 16);
    for request in requests.iter() {
        assert_eq!(request.reference_image.as_ref(), Some(&avatar));
        assert_eq!(request.style_tokens, character.style_tokens);
        assert_eq!(request.trace.agent, AgentKind::Drawing);
        assert_eq!(request.trace.session_id, players.session.as_str());
    }
    for chapter in ChapterIndex::all() {
        let segment = &session.segments[&chapter];
        let prompts: Vec<_> = requests.iter().filter(|r| r.trace.chapter == chapter.get()).collect();
        assert_eq!(prompts.len(), 4);
        for paragraph in &segment.paragraphs {
            assert!(prompts.iter().any(|r| r.prompt.ends_with(paragraph.as_str())));
        }
    }
}

#[tokio::test]
async fn stalled_first_generation_leaves_no_regeneration() {
    let dir = tempfile::tempdir().unwrap();
    let settings = PipelineSettings {
        chapter_timeout_ms: 150,
        ..Default::default()
    };
    let engine = Engine::open(deterministic_config(
        dir.path(),
        generator(Arc::new(Stalled), Arc::new(MockImageModel::default()), settings),
    ))
    .await
    .unwrap();
    let players = start_session(&engine, "high_school").await;
    let job = engine
        .submit_input(&players.session, ChapterIndex::FIRST, INPUTS[0], players.actor(Role::Protagonist))
        .await
        .unwrap();
    let status = wait_for_job(&engine, &job).await;
    assert!(matches!(&status.state, JobState::Failed { error, .. } if error == "Timeout"));
    let session = engine.snapshot(&players.session).unwrap();
    assert!(session.regenerations.is_empty());
    assert_eq!(session.current_turn().unwrap(), Role::Protagonist);
}
