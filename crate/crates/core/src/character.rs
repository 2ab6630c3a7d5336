//! The protagonist: a source photo or sketch, its stylized avatar and the
//! name the group agrees on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{ImageRef, MediaType};

pub const MAX_NAME_CHARS: usize = 40;
pub const MAX_SOURCE_BYTES: usize = 10 * 1024 * 1024;

/// Style descriptor sent with every avatar and illustration request.
pub const DEFAULT_STYLE_TOKENS: &str =
    "soft watercolor storybook illustration, warm palette, clean ink outlines, consistent character design";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterProfile {
    /// Empty until confirmed.
    pub name: String,
    pub source_image: ImageRef,
    pub avatar: Option<ImageRef>,
    pub style_tokens: String,
    pub confirmed: bool,
}

impl CharacterProfile {
    pub fn from_source(source_image: ImageRef) -> Self {
        Self {
            name: String::new(),
            source_image,
            avatar: None,
            style_tokens: String::new(),
            confirmed: false,
        }
    }

    /// The avatar, once the profile is confirmed.
    pub fn confirmed_avatar(&self) -> Option<&ImageRef> {
        self.avatar.as_ref().filter(|_| self.confirmed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CharacterError {
    #[error("image is {size} bytes; the limit is {MAX_SOURCE_BYTES}")]
    TooLarge { size: usize },
    #[error("unsupported media: {0}")]
    UnsupportedMedia(String),
}

impl CharacterError {
    pub fn code(&self) -> &'static str {
        match self {
            CharacterError::TooLarge { .. } => "TooLarge",
            CharacterError::UnsupportedMedia(_) => "UnsupportedMedia",
        }
    }
}

/// A protagonist name: non-blank, at most 40 characters, no template braces.
pub fn validate_name(name: &str) -> Result<(), String> {
    let trimmed = name.trim();
    if trimmed.is_empty() {
        return Err("name is empty".into());
    }
    if trimmed.chars().count() > MAX_NAME_CHARS {
        return Err(format!("name exceeds {MAX_NAME_CHARS} characters"));
    }
    if trimmed.contains(['{', '}']) || trimmed.chars().any(char::is_control) {
        return Err("name contains reserved characters".into());
    }
    Ok(())
}

/// Checks that `bytes` hold a decodable PNG or JPEG within the size limit and
/// returns its media type and dimensions. A declared media type, when given,
/// must agree with the bytes.
pub fn inspect_source(bytes: &[u8], declared: Option<&str>) -> Result<(MediaType, u32, u32), CharacterError> {
    if bytes.len() > MAX_SOURCE_BYTES {
        return Err(CharacterError::TooLarge { size: bytes.len() });
    }
    let media = MediaType::sniff(bytes)
        .ok_or_else(|| CharacterError::UnsupportedMedia("bytes are neither PNG nor JPEG".into()))?;
    if let Some(declared) = declared.filter(|d| !d.is_empty() && *d != "application/octet-stream") {
        if MediaType::from_mime(declared) != Some(media) {
            return Err(CharacterError::UnsupportedMedia(format!(
                "declared {declared} but the bytes are {}",
                media.mime()
            )));
        }
    }
    let format = match media {
        MediaType::Png => image::ImageFormat::Png,
        MediaType::Jpeg => image::ImageFormat::Jpeg,
    };
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| CharacterError::UnsupportedMedia(format!("cannot decode image: {e}")))?;
    Ok((media, decoded.width(), decoded.height()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jpeg(width: u32, height: u32) -> Vec<u8> {
        let img = image::RgbImage::from_fn(width, height, |x, y| image::Rgb([x as u8, y as u8, 128]));
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Jpeg).unwrap();
        out.into_inner()
    }

    #[test]
    fn valid_jpeg_passes_through() {
        let bytes = jpeg(40, 30);
        assert_eq!(inspect_source(&bytes, Some("image/jpeg")), Ok((MediaType::Jpeg, 40, 30)));
        assert_eq!(inspect_source(&bytes, None), Ok((MediaType::Jpeg, 40, 30)));
        assert!(matches!(
            inspect_source(&bytes, Some("image/png")),
            Err(CharacterError::UnsupportedMedia(_))
        ));
    }

    #[test]
    fn oversized_and_non_image_inputs() {
        let big = vec![0u8; 11 * 1024 * 1024];
        assert_eq!(
            inspect_source(&big, Some("image/png")),
            Err(CharacterError::TooLarge { size: big.len() })
        );
        assert!(matches!(
            inspect_source(b"just some text\n", None),
            Err(CharacterError::UnsupportedMedia(_))
        ));
        // right magic, broken body
        assert!(matches!(
            inspect_source(b"\x89PNG\r\n\x1a\ngarbage", None),
            Err(CharacterError::UnsupportedMedia(_))
        ));
    }

    #[test]
    fn name_bounds() {
        assert!(validate_name("Mei").is_ok());
        assert!(validate_name("").is_err());
        assert!(validate_name("   ").is_err());
        assert!(validate_name(&"a".repeat(40)).is_ok());
        assert!(validate_name(&"a".repeat(41)).is_err());
        assert!(validate_name("{protagonist_name}").is_err());
    }
}
