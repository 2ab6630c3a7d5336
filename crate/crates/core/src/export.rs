//! Finished stories as JSON documents or self-contained HTML pages.
//!
//! Exports carry the stylized avatar and illustrations only; the uploaded
//! source photo never leaves the session store.

use std::fmt::Write as _;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::ImageRef;
use crate::blob::{BlobError, BlobStore};
use crate::ids::SessionId;
use crate::narrative::{spec_for, ChapterIndex, DramaticStage, HopeComponent};
use crate::session::{turn_for, Role, Session, SessionPhase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Html,
}

impl ExportFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Json => "application/json",
            ExportFormat::Html => "text/html; charset=utf-8",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "html" => Ok(ExportFormat::Html),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryCharacter {
    pub name: String,
    pub avatar: ImageRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryChapter {
    pub index: ChapterIndex,
    pub title: String,
    pub hope_component: HopeComponent,
    pub dramatic_stage: DramaticStage,
    pub player_role: Role,
    pub player_input: String,
    pub paragraphs: Vec<String>,
    pub illustrations: Vec<ImageRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryDocument {
    pub session_id: SessionId,
    pub scenario_title: String,
    pub character: StoryCharacter,
    pub chapters: Vec<StoryChapter>,
    pub created_at: DateTime<Utc>,
}

impl StoryDocument {
    pub fn images(&self) -> impl Iterator<Item = &ImageRef> {
        std::iter::once(&self.character.avatar).chain(self.chapters.iter().flat_map(|c| &c.illustrations))
    }
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("export needs a finished story; the session is in {0}")]
    WrongPhase(SessionPhase),
    #[error("image {0} is missing from the session store")]
    MissingImage(String),
    #[error("session is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Blob(BlobError),
}

impl ExportError {
    pub fn code(&self) -> &'static str {
        match self {
            ExportError::WrongPhase(_) => "WrongPhase",
            ExportError::MissingImage(_) => "MissingImage",
            ExportError::Inconsistent(_) => "Inconsistent",
            ExportError::Blob(_) => "IoError",
        }
    }
}

/// Assembles the document for a session in `Presentation` or `Closed`.
pub fn story_document(session: &Session) -> Result<StoryDocument, ExportError> {
    if !matches!(session.phase, SessionPhase::Presentation | SessionPhase::Closed) {
        return Err(ExportError::WrongPhase(session.phase));
    }
    let inconsistent = |m: &str| ExportError::Inconsistent(m.to_string());
    let scenario = session.scenario.as_ref().ok_or_else(|| inconsistent("no scenario"))?;
    let character = session
        .character
        .as_ref()
        .filter(|c| c.confirmed)
        .ok_or_else(|| inconsistent("no confirmed character"))?;
    let avatar = character.avatar.clone().ok_or_else(|| inconsistent("no avatar"))?;

    let mut chapters = Vec::with_capacity(4);
    for index in ChapterIndex::all() {
        let segment = session
            .segments
            .get(&index)
            .ok_or_else(|| ExportError::Inconsistent(format!("chapter {index} is missing")))?;
        let spec = spec_for(index);
        chapters.push(StoryChapter {
            index,
            title: spec.title.to_string(),
            hope_component: spec.hope_component,
            dramatic_stage: spec.dramatic_stage,
            player_role: turn_for(index),
            player_input: segment.player_input.clone(),
            paragraphs: segment.paragraphs.clone(),
            illustrations: segment.illustrations.clone(),
        });
    }
    Ok(StoryDocument {
        session_id: session.id.clone(),
        scenario_title: scenario.title.clone(),
        character: StoryCharacter {
            name: character.name.clone(),
            avatar,
        },
        chapters,
        created_at: session.created_at,
    })
}

fn load(blobs: &BlobStore, image: &ImageRef) -> Result<Vec<u8>, ExportError> {
    blobs.get(&image.content_address).map_err(|e| match e {
        BlobError::NotFound(addr) => ExportError::MissingImage(addr),
        other => ExportError::Blob(other),
    })
}

/// Renders the story. Output is a pure function of the session and blobs.
pub fn export_story(session: &Session, blobs: &BlobStore, format: ExportFormat) -> Result<Vec<u8>, ExportError> {
    let document = story_document(session)?;
    for image in document.images() {
        if !blobs.contains(&image.content_address) {
            return Err(ExportError::MissingImage(image.content_address.clone()));
        }
    }
    match format {
        ExportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(&document).expect("documents serialize");
            bytes.push(b'\n');
            Ok(bytes)
        }
        ExportFormat::Html => render_html(&document, blobs).map(String::into_bytes),
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn data_uri(blobs: &BlobStore, image: &ImageRef) -> Result<String, ExportError> {
    let bytes = load(blobs, image)?;
    Ok(format!("data:{};base64,{}", image.media_type.mime(), BASE64.encode(bytes)))
}

const STYLE: &str = "body{font-family:Georgia,serif;max-width:52rem;margin:2rem auto;padding:0 1rem;color:#222;line-height:1.6}\
header{text-align:center}header img{width:12rem;border-radius:50%}\
section{margin:3rem 0}.meta{color:#666;font-size:.9rem}\
figure{margin:1rem 0}figure img{width:100%;border-radius:.5rem}";

fn render_html(document: &StoryDocument, blobs: &BlobStore) -> Result<String, ExportError> {
    let mut html = String::new();
    let name = escape(&document.character.name);
    let title = escape(&document.scenario_title);
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{name}: {title}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n"
    );
    let _ = write!(
        html,
        "<header>\n<h1>{name}</h1>\n<p class=\"meta\">{title}</p>\n<img alt=\"{name}\" src=\"{}\">\n</header>\n",
        data_uri(blobs, &document.character.avatar)?
    );
    for chapter in &document.chapters {
        let _ = write!(
            html,
            "<section id=\"chapter-{}\">\n<h2>Chapter {}: {}</h2>\n<p class=\"meta\">Hope: {} &middot; {} &middot; Idea from the {} player: &ldquo;{}&rdquo;</p>\n",
            chapter.index,
            chapter.index,
            escape(&chapter.title),
            chapter.hope_component,
            chapter.dramatic_stage.label(),
            chapter.player_role,
            escape(&chapter.player_input),
        );
        for (i, (paragraph, image)) in chapter.paragraphs.iter().zip(&chapter.illustrations).enumerate() {
            let _ = write!(
                html,
                "<figure><img alt=\"Chapter {} illustration {}\" src=\"{}\"></figure>\n<p>{}</p>\n",
                chapter.index,
                i + 1,
                data_uri(blobs, image)?,
                escape(paragraph)
            );
        }
        html.push_str("</section>\n");
    }
    html.push_str("</body>\n</html>\n");
    Ok(html)
}
