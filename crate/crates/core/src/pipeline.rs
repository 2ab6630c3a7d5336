//! The Questioning, Writing and Drawing agents.
//!
//! Request assembly (`build_*`) is pure and deterministic. [`ChapterGenerator`]
//! runs the agents against the configured backends and returns a complete
//! [`StorySegment`] or a [`ChapterFailure`]; it never touches session state.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use futures::future::try_join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{AgentKind, BackendError, Backends, ImageRef, ImageRequest, TextRequest, Trace};
use crate::blob::BlobStore;
use crate::character::CharacterProfile;
use crate::ids::{Clock, SessionId};
use crate::narrative::{
    render_inquiry, spec_for, validate_player_input, ChapterIndex, DramaticStage, HopeComponent, InputRejection,
    NarrativeError,
};
use crate::session::{turn_for, InquirySource, Scenario, Session};

pub const INPUT_OPEN: &str = "[player input]";
pub const INPUT_CLOSE: &str = "[/player input]";
pub const PROTAGONIST_LABEL: &str = "Protagonist:";

pub const PARAGRAPHS_PER_SEGMENT: usize = 4;
/// Characters of earlier chapters passed to the Writing Agent.
pub const CONTINUITY_BUDGET_CHARS: usize = 6000;
pub const QUESTION_MAX_CHARS: usize = 600;
pub const STORY_MAX_CHARS: usize = 8000;

/// Per-chapter prompt document, derived from the chapter framework.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSchema {
    pub chapter_index: ChapterIndex,
    pub narrative_arc: DramaticStage,
    pub inquiry_protocol: String,
    pub stylistic_guidelines: String,
    pub hope_component: HopeComponent,
}

impl PromptSchema {
    pub fn derive(chapter: ChapterIndex) -> Self {
        let spec = spec_for(chapter);
        Self {
            chapter_index: spec.index,
            narrative_arc: spec.dramatic_stage,
            inquiry_protocol: spec.inquiry_goal.to_string(),
            stylistic_guidelines: spec.writing_guidelines.to_string(),
            hope_component: spec.hope_component,
        }
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("prompt schema {path}: {message}")]
    Invalid { path: String, message: String },
    #[error("prompt schema {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One schema per chapter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSchemas(BTreeMap<ChapterIndex, PromptSchema>);

impl Default for PromptSchemas {
    fn default() -> Self {
        Self(ChapterIndex::all().map(|c| (c, PromptSchema::derive(c))).collect())
    }
}

impl PromptSchemas {
    /// Loads `chapter_1.json` .. `chapter_4.json`. Text fields may be edited;
    /// index, arc and hope component must match the chapter framework.
    pub fn load_dir(dir: &Path) -> Result<Self, SchemaError> {
        let mut out = BTreeMap::new();
        for chapter in ChapterIndex::all() {
            let path = dir.join(format!("chapter_{chapter}.json"));
            let shown = path.display().to_string();
            let text = std::fs::read_to_string(&path).map_err(|source| SchemaError::Io {
                path: shown.clone(),
                source,
            })?;
            let schema: PromptSchema = serde_json::from_str(&text).map_err(|e| SchemaError::Invalid {
                path: shown.clone(),
                message: e.to_string(),
            })?;
            let derived = PromptSchema::derive(chapter);
            let invalid = |message: String| SchemaError::Invalid {
                path: shown.clone(),
                message,
            };
            if schema.chapter_index != chapter {
                return Err(invalid(format!("chapter_index is {}", schema.chapter_index)));
            }
            if schema.narrative_arc != derived.narrative_arc || schema.hope_component != derived.hope_component {
                return Err(invalid("narrative_arc and hope_component must match the chapter framework".into()));
            }
            if schema.inquiry_protocol.trim().is_empty() || schema.stylistic_guidelines.trim().is_empty() {
                return Err(invalid("text fields must be non-empty".into()));
            }
            out.insert(chapter, schema);
        }
        Ok(Self(out))
    }

    pub fn get(&self, chapter: ChapterIndex) -> &PromptSchema {
        &self.0[&chapter]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptSchema> {
        self.0.values()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationMeta {
    pub backend_id: String,
    pub duration_ms: u64,
    pub regeneration_count: u32,
}

/// One chapter's output: four paragraphs, each with an illustration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorySegment {
    pub chapter_index: ChapterIndex,
    pub player_input: String,
    pub paragraphs: Vec<String>,
    pub illustrations: Vec<ImageRef>,
    pub generation_meta: GenerationMeta,
}

impl StorySegment {
    pub fn validate(&self) -> Result<(), String> {
        if self.paragraphs.len() != PARAGRAPHS_PER_SEGMENT {
            return Err(format!("expected 4 paragraphs, got {}", self.paragraphs.len()));
        }
        if self.illustrations.len() != PARAGRAPHS_PER_SEGMENT {
            return Err(format!("expected 4 illustrations, got {}", self.illustrations.len()));
        }
        if self.paragraphs.iter().any(|p| p.trim().is_empty()) {
            return Err("empty paragraph".into());
        }
        if self.illustrations.iter().any(|i| i.content_address.is_empty()) {
            return Err("illustration without content address".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationContext {
    pub scenario: Scenario,
    pub character: CharacterProfile,
    /// Earlier segments, ordered by chapter with no gaps.
    pub prior_segments: Vec<StorySegment>,
    pub current_input: String,
}

impl GenerationContext {
    /// Context for the chapter the session is generating.
    pub fn from_session(session: &Session, chapter: ChapterIndex) -> Result<Self, PipelineError> {
        let scenario = session.scenario.clone().ok_or(PipelineError::NoScenario)?;
        let character = session
            .character
            .clone()
            .filter(|c| c.confirmed)
            .ok_or(PipelineError::UnconfirmedCharacter)?;
        let current_input = session
            .pending_input
            .clone()
            .ok_or(PipelineError::InvalidInput(InputRejection::Empty))?;
        let prior_segments = session
            .segments
            .range(..chapter)
            .map(|(_, s)| s.clone())
            .collect();
        Ok(Self {
            scenario,
            character,
            prior_segments,
            current_input,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("the character has not been confirmed")]
    UnconfirmedCharacter,
    #[error("no scenario selected")]
    NoScenario,
    #[error("input rejected: {0}")]
    InvalidInput(InputRejection),
    #[error("expected 4 paragraphs, got {0}")]
    WrongParagraphCount(usize),
    #[error("prior segments are not chapters 1..{0} in order")]
    PriorSegmentsOutOfOrder(ChapterIndex),
    #[error(transparent)]
    Narrative(#[from] NarrativeError),
}

fn trace(session_id: &SessionId, chapter: ChapterIndex, agent: AgentKind) -> Trace {
    Trace {
        session_id: session_id.to_string(),
        chapter: chapter.get(),
        agent,
    }
}

fn confirmed_name(character: Option<&CharacterProfile>) -> Result<&str, PipelineError> {
    character
        .filter(|c| c.confirmed && !c.name.trim().is_empty())
        .map(|c| c.name.as_str())
        .ok_or(PipelineError::UnconfirmedCharacter)
}

/// Questioning Agent request: narrator persona and the chapter's inquiry goal,
/// then the setting and the rendered template question on the last line.
pub fn build_question_request(
    schema: &PromptSchema,
    scenario: &Scenario,
    character: Option<&CharacterProfile>,
    session_id: &SessionId,
) -> Result<TextRequest, PipelineError> {
    let name = confirmed_name(character)?;
    let spec = spec_for(schema.chapter_index);
    let rendered = render_inquiry(spec, scenario, name)?;
    let system_directive = format!(
        "You are the narrator of a collaborative storytelling game played by three adolescents. \
         Ask one short, warm, context-aware question for chapter {} of 4, \"{}\". \
         Purpose of the question: {} Reply with the question only.",
        schema.chapter_index,
        spec.title,
        schema.inquiry_protocol.trim()
    );
    let user_message = format!(
        "Scenario: {}. {}\n{PROTAGONIST_LABEL} {name}\nAnswering player: {}\nBase question:\n{rendered}",
        scenario.title,
        scenario.setting_description.trim(),
        turn_for(schema.chapter_index),
    );
    Ok(TextRequest {
        system_directive,
        user_message,
        trace: trace(session_id, schema.chapter_index, AgentKind::Questioning),
        max_length: QUESTION_MAX_CHARS,
    })
}

fn hope_directive(schema: &PromptSchema) -> &'static str {
    match schema.hope_component {
        HopeComponent::Goals => {
            "Hope focus (Goals): make the protagonist's goal concrete, specific and personally meaningful, \
             stated in the player's own terms."
        }
        HopeComponent::Pathways if schema.narrative_arc == DramaticStage::Climax => {
            "Hope focus (Pathways): the obstacle must block the route built so far without making the goal \
             impossible; leave room for a new route."
        }
        HopeComponent::Pathways => {
            "Hope focus (Pathways): show at least one concrete, plausible route from where the protagonist \
             stands toward the goal."
        }
        HopeComponent::Agency => {
            "Hope focus (Agency): the resolution must originate from the protagonist's own plan as proposed by \
             the player. Do not resolve the obstacle through luck, rescue by others or any deus ex machina; \
             end with the protagonist carrying out their own strategy."
        }
    }
}

/// Full text of earlier chapters, dropping whole paragraphs oldest-first
/// until the paragraph text fits the budget. `None` when nothing precedes.
fn continuity_block(prior: &[StorySegment]) -> Option<String> {
    let mut paragraphs: Vec<(ChapterIndex, &str)> = prior
        .iter()
        .flat_map(|s| s.paragraphs.iter().map(move |p| (s.chapter_index, p.as_str())))
        .collect();
    let mut total: usize = paragraphs.iter().map(|(_, p)| p.chars().count()).sum();
    let mut dropped = 0;
    while total > CONTINUITY_BUDGET_CHARS && dropped < paragraphs.len() {
        total -= paragraphs[dropped].1.chars().count();
        dropped += 1;
    }
    paragraphs.drain(..dropped);
    if paragraphs.is_empty() {
        return None;
    }

    let mut block = String::from("Story so far:");
    let mut current = None;
    for (chapter, paragraph) in paragraphs {
        if current != Some(chapter) {
            block.push_str(&format!("\n\nChapter {chapter}: {}", spec_for(chapter).title));
            current = Some(chapter);
        }
        block.push_str("\n\n");
        block.push_str(paragraph);
    }
    Some(block)
}

/// Writing Agent request for the schema's chapter.
pub fn build_writing_request(
    schema: &PromptSchema,
    context: &GenerationContext,
    session_id: &SessionId,
) -> Result<TextRequest, PipelineError> {
    let input = validate_player_input(&context.current_input).map_err(PipelineError::InvalidInput)?;
    let name = confirmed_name(Some(&context.character))?;
    let chapter = schema.chapter_index;
    let in_order = context
        .prior_segments
        .iter()
        .map(|s| s.chapter_index.get())
        .eq(1..chapter.get());
    if !in_order {
        return Err(PipelineError::PriorSegmentsOutOfOrder(chapter));
    }
    let spec = spec_for(chapter);

    let system_directive = format!(
        "You are the Writing Agent of a collaborative storytelling game for adolescents. Three players share \
         one protagonist, and each chapter turns one player's idea into the next part of the story.\n\n\
         Chapter {chapter} of 4: \"{}\". Dramatic stage: {}.\n\n\
         Guidelines: {}\n\n{}\n\n\
         Output contract: write exactly four paragraphs of prose, separated by single blank lines. \
         No title, headings, lists or commentary.",
        spec.title,
        schema.narrative_arc.label(),
        schema.stylistic_guidelines.trim(),
        hope_directive(schema),
    );

    let mut user_message = format!(
        "Scenario: {}. {}\n{PROTAGONIST_LABEL} {name}\n",
        context.scenario.title,
        context.scenario.setting_description.trim(),
    );
    if let Some(block) = continuity_block(&context.prior_segments) {
        user_message.push('\n');
        user_message.push_str(&block);
        user_message.push('\n');
    }
    user_message.push_str(&format!(
        "\nInput from the {} player, to be used as given:\n{INPUT_OPEN}\n{input}\n{INPUT_CLOSE}\n\n\
         Write chapter {chapter} now.",
        turn_for(chapter)
    ));

    Ok(TextRequest {
        system_directive,
        user_message,
        trace: trace(session_id, chapter, AgentKind::Writing),
        max_length: STORY_MAX_CHARS,
    })
}

/// Splits on blank lines and requires exactly four non-empty paragraphs.
pub fn parse_story_response(raw: &str) -> Result<Vec<String>, PipelineError> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in raw.trim().lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim());
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join("\n"));
    }
    if paragraphs.len() == PARAGRAPHS_PER_SEGMENT {
        Ok(paragraphs)
    } else {
        Err(PipelineError::WrongParagraphCount(paragraphs.len()))
    }
}

/// Drawing Agent requests, one per paragraph, each conditioned on the avatar.
pub fn build_illustration_requests(
    paragraphs: &[String],
    character: &CharacterProfile,
    style_tokens: &str,
    session_id: &SessionId,
    chapter: ChapterIndex,
) -> Result<Vec<ImageRequest>, PipelineError> {
    if paragraphs.len() != PARAGRAPHS_PER_SEGMENT {
        return Err(PipelineError::WrongParagraphCount(paragraphs.len()));
    }
    let avatar = character
        .confirmed_avatar()
        .ok_or(PipelineError::UnconfirmedCharacter)?;
    Ok(paragraphs
        .iter()
        .enumerate()
        .map(|(i, paragraph)| ImageRequest {
            prompt: format!(
                "Illustration {} of 4 for chapter {chapter}. The protagonist {} looks exactly as in the \
                 reference image. Scene: {paragraph}",
                i + 1,
                character.name
            ),
            reference_image: Some(avatar.clone()),
            style_tokens: style_tokens.to_string(),
            trace: trace(session_id, chapter, AgentKind::Drawing),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestioningMode {
    /// Present the scenario template as written.
    #[default]
    Template,
    /// Ask the text backend to rephrase it, falling back to the template.
    Backend,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub chapter_timeout_ms: u64,
    /// Writing attempts per chapter; the second one is the automatic retry.
    pub generation_attempts: u32,
    pub questioning: QuestioningMode,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            chapter_timeout_ms: 120_000,
            generation_attempts: 2,
            questioning: QuestioningMode::Template,
        }
    }
}

/// Why a chapter job failed.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ChapterFailure {
    #[error("chapter generation timed out")]
    Timeout,
    #[error("generation failed ({kind}): {message}")]
    BackendFailure { kind: String, message: String },
}

impl ChapterFailure {
    pub fn code(&self) -> &'static str {
        match self {
            ChapterFailure::Timeout => "Timeout",
            ChapterFailure::BackendFailure { .. } => "BackendFailure",
        }
    }

    /// The detailed kind: `Timeout`, `WrongParagraphCount`, or a backend error kind.
    pub fn kind(&self) -> &str {
        match self {
            ChapterFailure::Timeout => "Timeout",
            ChapterFailure::BackendFailure { kind, .. } => kind,
        }
    }

    fn from_backend(e: BackendError) -> Self {
        match e {
            BackendError::Timeout => ChapterFailure::Timeout,
            other => ChapterFailure::BackendFailure {
                kind: other.kind().into(),
                message: other.to_string(),
            },
        }
    }
}

/// Runs the three agents for one chapter.
#[derive(Clone)]
pub struct ChapterGenerator {
    pub backends: Backends,
    pub schemas: PromptSchemas,
    pub settings: PipelineSettings,
}

impl ChapterGenerator {
    pub fn new(backends: Backends, schemas: PromptSchemas, settings: PipelineSettings) -> Self {
        Self {
            backends,
            schemas,
            settings,
        }
    }

    pub fn mock() -> Self {
        Self::new(Backends::mock(), PromptSchemas::default(), PipelineSettings::default())
    }

    /// The chapter question and where it came from.
    pub async fn question(
        &self,
        session_id: &SessionId,
        chapter: ChapterIndex,
        scenario: &Scenario,
        character: &CharacterProfile,
    ) -> Result<(String, InquirySource), PipelineError> {
        let name = confirmed_name(Some(character))?;
        let template = render_inquiry(spec_for(chapter), scenario, name)?;
        if self.settings.questioning == QuestioningMode::Template {
            return Ok((template, InquirySource::Template));
        }
        let request = build_question_request(self.schemas.get(chapter), scenario, Some(character), session_id)?;
        match self.backends.text.generate_text(&request).await {
            Ok(text) => Ok((text.trim().to_string(), InquirySource::Backend)),
            Err(e) => {
                tracing::warn!(session = %session_id, %chapter, error = %e, "questioning backend failed; using template");
                Ok((template, InquirySource::Template))
            }
        }
    }

    /// Generates a full segment under the chapter timeout.
    pub async fn generate(
        &self,
        session_id: &SessionId,
        chapter: ChapterIndex,
        context: &GenerationContext,
        regeneration_count: u32,
        store: &BlobStore,
        clock: &dyn Clock,
    ) -> Result<StorySegment, ChapterFailure> {
        let started = clock.now();
        let limit = Duration::from_millis(self.settings.chapter_timeout_ms.max(1));
        let (paragraphs, illustrations) =
            tokio::time::timeout(limit, self.run(session_id, chapter, context, store))
                .await
                .map_err(|_| ChapterFailure::Timeout)??;
        let elapsed = (clock.now() - started).num_milliseconds().max(0) as u64;
        Ok(StorySegment {
            chapter_index: chapter,
            player_input: context.current_input.trim().to_string(),
            paragraphs,
            illustrations,
            generation_meta: GenerationMeta {
                backend_id: self.backends.text.descriptor().id.clone(),
                duration_ms: elapsed,
                regeneration_count,
            },
        })
    }

    async fn run(
        &self,
        session_id: &SessionId,
        chapter: ChapterIndex,
        context: &GenerationContext,
        store: &BlobStore,
    ) -> Result<(Vec<String>, Vec<ImageRef>), ChapterFailure> {
        let invalid = |e: PipelineError| ChapterFailure::BackendFailure {
            kind: "InvalidRequest".into(),
            message: e.to_string(),
        };
        let request = build_writing_request(self.schemas.get(chapter), context, session_id).map_err(invalid)?;

        let mut last = None;
        let mut paragraphs = None;
        for attempt in 1..=self.settings.generation_attempts.max(1) {
            match self.backends.text.generate_text(&request).await {
                Ok(raw) => match parse_story_response(&raw) {
                    Ok(p) => {
                        paragraphs = Some(p);
                        break;
                    }
                    Err(e) => {
                        tracing::info!(session = %session_id, %chapter, attempt, error = %e, "story violated the output contract");
                        last = Some(ChapterFailure::BackendFailure {
                            kind: "WrongParagraphCount".into(),
                            message: e.to_string(),
                        });
                    }
                },
                Err(e) if e.is_transient() || e == BackendError::EmptyResponse => {
                    tracing::info!(session = %session_id, %chapter, attempt, error = %e, "writing attempt failed");
                    last = Some(ChapterFailure::from_backend(e));
                }
                Err(e) => return Err(ChapterFailure::from_backend(e)),
            }
        }
        let Some(paragraphs) = paragraphs else {
            return Err(last.unwrap_or(ChapterFailure::Timeout));
        };

        let requests = build_illustration_requests(
            &paragraphs,
            &context.character,
            &context.character.style_tokens,
            session_id,
            chapter,
        )
        .map_err(invalid)?;
        let illustrations = try_join_all(
            requests
                .iter()
                .map(|r| self.backends.image.generate_image(r, store)),
        )
        .await
        .map_err(ChapterFailure::from_backend)?;
        Ok((paragraphs, illustrations))
    }
}
