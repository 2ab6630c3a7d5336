#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use triadtale_core::character::DEFAULT_STYLE_TOKENS;
use triadtale_core::ids::{FixedClock, ParticipantId, SequentialIds, SessionId};
use triadtale_core::jobs::{JobState, JobStatus};
use triadtale_core::pipeline::ChapterGenerator;
use triadtale_core::session::ScenarioRegistry;
use triadtale_core::{Actor, ChapterIndex, Engine, EngineConfig, Role};

pub fn deterministic_config(dir: &std::path::Path, generator: ChapterGenerator) -> EngineConfig {
    EngineConfig {
        data_dir: dir.to_path_buf(),
        scenarios: ScenarioRegistry::defaults(),
        generator,
        clock: Arc::new(FixedClock::default()),
        ids: Arc::new(SequentialIds::default()),
        style_tokens: DEFAULT_STYLE_TOKENS.to_string(),
    }
}

/// A small PNG standing in for a selfie.
pub fn selfie(seed: u8) -> Vec<u8> {
    let img = image::RgbImage::from_fn(64, 48, |x, y| {
        image::Rgb([(x * 4) as u8 ^ seed, (y * 5) as u8, seed.wrapping_mul(3)])
    });
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub async fn wait_for_job(engine: &Engine, job: &JobStatus) -> JobStatus {
    for _ in 0..2000 {
        let status = engine.job(&job.job_id).unwrap();
        if matches!(status.state, JobState::Done { .. } | JobState::Failed { .. }) {
            return status;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("job {} did not finish", job.job_id);
}

pub struct Players {
    pub session: SessionId,
    pub tokens: Vec<(ParticipantId, String)>,
}

impl Players {
    pub fn actor(&self, role: Role) -> Actor {
        let index = Role::ALL.iter().position(|r| *r == role).unwrap();
        Actor::Participant(self.tokens[index].0.clone())
    }
}

/// Runs a session up to Chapter(1, AwaitingInput).
pub async fn start_session(engine: &Engine, scenario: &str) -> Players {
    let session = engine.create_session().await.unwrap().id.clone();
    engine.select_scenario(&session, scenario, Actor::Group).await.unwrap();
    let mut tokens = Vec::new();
    for name in ["Ana", "Ben", "Cai"] {
        tokens.push(engine.join(&session, name, false, Actor::Group).await.unwrap());
    }
    for ((participant, _), role) in tokens.iter().zip(Role::ALL) {
        engine.assign_role(&session, participant, role, Actor::Group).await.unwrap();
    }
    engine
        .ingest_source(&session, &selfie(7), Some("image/png"), Actor::Group)
        .await
        .unwrap();
    let job = engine.start_avatar(&session, Actor::Group).await.unwrap();
    let done = wait_for_job(engine, &job).await;
    assert!(matches!(done.state, JobState::Done { .. }), "{done:?}");
    engine.confirm_character(&session, "Mei", Actor::Group).await.unwrap();
    Players { session, tokens }
}

pub const INPUTS: [&str; 4] = [
    "I want to join the astronomy club",
    "An older student lends Mei a telescope",
    "The telescope breaks the night before the contest",
    "Mei builds a new mount from spare parts with friends",
];

/// Plays all four chapters through to Presentation.
pub async fn play_all_chapters(engine: &Engine, players: &Players) {
    for (n, input) in (1..=4u8).zip(INPUTS) {
        let chapter = ChapterIndex::new(n).unwrap();
        let owner = triadtale_core::session::turn_for(chapter);
        let job = engine
            .submit_input(&players.session, chapter, input, players.actor(owner))
            .await
            .unwrap();
        let done = wait_for_job(engine, &job).await;
        assert!(matches!(done.state, JobState::Done { .. }), "{done:?}");
        engine.accept(&players.session, chapter, Actor::Group).await.unwrap();
    }
}
