//! The four-chapter story framework as static data.
//!
//! Each chapter is owned by one role, carries one hope-theory component and
//! sits at one stage of the classic dramatic arc:
//!
//! | # | Title           | Role        | Component | Stage         |
//! |---|-----------------|-------------|-----------|---------------|
//! | 1 | The Goal        | Protagonist | Goals     | Exposition    |
//! | 2 | The Opportunity | Opportunity | Pathways  | Rising action |
//! | 3 | The Challenge   | Challenge   | Pathways  | Climax        |
//! | 4 | The Resolve     | Protagonist | Agency    | Resolution    |

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::session::{Role, Scenario};

/// Slot substituted into scenario inquiry templates.
pub const NAME_SLOT: &str = "{protagonist_name}";

/// Upper bound on a player's chapter input, in characters after trimming.
pub const MAX_INPUT_CHARS: usize = 1000;

/// Chapter number in `1..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "u8")]
pub struct ChapterIndex(u8);

impl ChapterIndex {
    pub const FIRST: ChapterIndex = ChapterIndex(1);
    pub const LAST: ChapterIndex = ChapterIndex(4);

    pub const fn new(n: u8) -> Option<Self> {
        if n >= 1 && n <= 4 {
            Some(Self(n))
        } else {
            None
        }
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    pub fn next(self) -> Option<Self> {
        Self::new(self.0 + 1)
    }

    pub fn all() -> impl Iterator<Item = ChapterIndex> {
        (1..=4).map(ChapterIndex)
    }
}

impl From<ChapterIndex> for u8 {
    fn from(c: ChapterIndex) -> u8 {
        c.0
    }
}

impl TryFrom<u8> for ChapterIndex {
    type Error = NarrativeError;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        Self::new(n).ok_or(NarrativeError::OutOfRange(i64::from(n)))
    }
}

impl fmt::Display for ChapterIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// Accepts integers and numeric strings, so TOML/JSON map keys work too.
impl<'de> Deserialize<'de> for ChapterIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;

        impl serde::de::Visitor<'_> for Visitor {
            type Value = ChapterIndex;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a chapter number between 1 and 4")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<ChapterIndex, E> {
                u8::try_from(v)
                    .ok()
                    .and_then(ChapterIndex::new)
                    .ok_or_else(|| E::custom(format!("chapter {v} is outside 1..=4")))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<ChapterIndex, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom(format!("chapter {v} is outside 1..=4")))
                    .and_then(|v| self.visit_u64(v))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<ChapterIndex, E> {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| E::custom(format!("`{v}` is not a chapter number")))
                    .and_then(|v| self.visit_u64(v))
            }
        }

        deserializer.deserialize_any(Visitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HopeComponent {
    Goals,
    Pathways,
    Agency,
}

impl fmt::Display for HopeComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DramaticStage {
    Exposition,
    RisingAction,
    Climax,
    Resolution,
}

impl DramaticStage {
    pub fn label(self) -> &'static str {
        match self {
            DramaticStage::Exposition => "Exposition",
            DramaticStage::RisingAction => "Rising Action",
            DramaticStage::Climax => "Climax",
            DramaticStage::Resolution => "Resolution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChapterSpec {
    pub index: ChapterIndex,
    pub title: &'static str,
    pub owning_role: Role,
    pub hope_component: HopeComponent,
    pub dramatic_stage: DramaticStage,
    pub inquiry_goal: &'static str,
    pub writing_guidelines: &'static str,
}

static CHAPTERS: [ChapterSpec; 4] = [
    ChapterSpec {
        index: ChapterIndex(1),
        title: "The Goal",
        owning_role: Role::Protagonist,
        hope_component: HopeComponent::Goals,
        dramatic_stage: DramaticStage::Exposition,
        inquiry_goal: "Ask the protagonist's player to name one concrete thing the character \
            wants most in this stage of life, specific enough to picture.",
        writing_guidelines: "Introduce the protagonist in the chosen setting and establish the \
            aspiration in the player's own terms. Keep the tone warm and grounded; show why the \
            goal matters to the character. Do not hint at how it will be reached yet.",
    },
    ChapterSpec {
        index: ChapterIndex(2),
        title: "The Opportunity",
        owning_role: Role::Opportunity,
        hope_component: HopeComponent::Pathways,
        dramatic_stage: DramaticStage::RisingAction,
        inquiry_goal: "Ask the opportunity player what unexpected person, resource or event \
            appears that could help the protagonist move toward the goal.",
        writing_guidelines: "Bring the player's opportunity into the story as a positive turn of \
            events and show the first route it opens toward the goal. Build momentum; the \
            protagonist should take a first step along this route.",
    },
    ChapterSpec {
        index: ChapterIndex(3),
        title: "The Challenge",
        owning_role: Role::Challenge,
        hope_component: HopeComponent::Pathways,
        dramatic_stage: DramaticStage::Climax,
        inquiry_goal: "Ask the challenge player what setback or complication gets in the way \
            just as things seem to be going well.",
        writing_guidelines: "Introduce the player's complication so that it seriously tests the \
            route built in the previous chapter. Raise the stakes and end on the obstacle still \
            unresolved. Keep it believable and age-appropriate; avoid despair.",
    },
    ChapterSpec {
        index: ChapterIndex(4),
        title: "The Resolve",
        owning_role: Role::Protagonist,
        hope_component: HopeComponent::Agency,
        dramatic_stage: DramaticStage::Resolution,
        inquiry_goal: "Ask the protagonist's player what the character decides to do to get past \
            the obstacle, in their own words and as a concrete plan.",
        writing_guidelines: "Resolve the story through the strategy the player proposed, carried \
            out by the protagonist. Show effort and small concrete steps, acknowledge the \
            difficulty, and close on the character's sense of their own capability.",
    },
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NarrativeError {
    #[error("chapter {0} is outside 1..=4")]
    OutOfRange(i64),
    #[error("scenario has no inquiry template for chapter {0}")]
    MissingTemplate(ChapterIndex),
    #[error("protagonist name is empty")]
    EmptyName,
    #[error("inquiry still contains an unfilled slot: {0}")]
    UnfilledSlot(String),
}

/// The static definition of one chapter.
pub fn chapter_spec(index: i64) -> Result<&'static ChapterSpec, NarrativeError> {
    u8::try_from(index)
        .ok()
        .and_then(ChapterIndex::new)
        .map(|c| &CHAPTERS[usize::from(c.get() - 1)])
        .ok_or(NarrativeError::OutOfRange(index))
}

pub fn spec_for(index: ChapterIndex) -> &'static ChapterSpec {
    &CHAPTERS[usize::from(index.get() - 1)]
}

pub fn all_chapters() -> &'static [ChapterSpec; 4] {
    &CHAPTERS
}

/// Fills the scenario's template for `spec.index` with the protagonist's name.
pub fn render_inquiry(
    spec: &ChapterSpec,
    scenario: &Scenario,
    protagonist_name: &str,
) -> Result<String, NarrativeError> {
    let name = protagonist_name.trim();
    if name.is_empty() {
        return Err(NarrativeError::EmptyName);
    }
    if name.contains(['{', '}']) {
        return Err(NarrativeError::UnfilledSlot(name.to_string()));
    }
    let template = scenario
        .chapter_inquiry_templates
        .get(&spec.index)
        .filter(|t| !t.trim().is_empty())
        .ok_or(NarrativeError::MissingTemplate(spec.index))?;
    let rendered = template.replace(NAME_SLOT, name);
    if rendered.contains(['{', '}']) {
        return Err(NarrativeError::UnfilledSlot(rendered));
    }
    Ok(rendered)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Error)]
pub enum InputRejection {
    #[error("input is empty")]
    Empty,
    #[error("input exceeds {MAX_INPUT_CHARS} characters")]
    TooLong,
}

/// Accepts non-blank input of at most [`MAX_INPUT_CHARS`] characters after
/// trimming and returns the trimmed text.
pub fn validate_player_input(text: &str) -> Result<&str, InputRejection> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(InputRejection::Empty);
    }
    if trimmed.chars().count() > MAX_INPUT_CHARS {
        return Err(InputRejection::TooLong);
    }
    Ok(trimmed)
}
