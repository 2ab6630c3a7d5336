//! Orchestration engine for four-chapter collaborative storytelling sessions.
//!
//! Three players share one protagonist. Each chapter is owned by one role,
//! opened by a question, answered by that role's player and expanded by the
//! generation pipeline into four paragraphs with four illustrations.

pub mod backend;
pub mod blob;
pub mod character;
pub mod engine;
pub mod export;
pub mod ids;
pub mod jobs;
pub mod narrative;
pub mod pipeline;
pub mod session;
pub mod store;

pub use engine::{Engine, EngineConfig, EngineError};
pub use export::{ExportFormat, StoryDocument};
pub use narrative::ChapterIndex;
pub use session::{Actor, Rejection, Role, Session, SessionPhase};
