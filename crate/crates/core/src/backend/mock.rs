//! Deterministic in-process models for tests and offline demos.
//!
//! Every output is a pure function of the request: the SHA-256 of the
//! serialized request picks phrasing and colours, so repeated calls return
//! byte-identical results.

use std::time::Duration;

use async_trait::async_trait;
use sha2::{Digest, Sha256};

use super::{AgentKind, BackendError, GeneratedImage, ImageModel, ImageRef, ImageRequest, MediaType, TextModel, TextRequest, Trace};
use crate::ids::sha256_hex;
use crate::pipeline::{INPUT_CLOSE, INPUT_OPEN, PROTAGONIST_LABEL};

pub const MOCK_IMAGE_SIZE: u32 = 768;
const AVATAR_BORDER: u32 = 16;

#[derive(Debug, Clone, Default)]
pub struct MockTextModel {
    pub latency: Duration,
}

impl MockTextModel {
    pub fn with_latency(latency: Duration) -> Self {
        Self { latency }
    }
}

const LEAD_INS: [&str; 4] = [
    "Here is a question for you.",
    "The story pauses here.",
    "Your turn to shape what happens.",
    "Think about this one together.",
];

const SETTINGS: [&str; 4] = [
    "The morning light spilled across the room",
    "A quiet afternoon settled over everything",
    "The usual noise of the day faded into the background",
    "A cool breeze came through the open window",
];

const MIDDLES: [&str; 4] = [
    "It was not going to be simple, but it felt real for the first time.",
    "Small details started to line up, one after another.",
    "Friends noticed the change and asked what had happened.",
    "Every step forward made the next one a little clearer.",
];

const TURNS: [&str; 4] = [
    "That evening, {name} wrote the plan down in a notebook.",
    "{name} took a deep breath and decided to keep going.",
    "By the end of the week, {name} could already see a difference.",
    "{name} smiled, knowing this chapter was only the beginning.",
];

#[async_trait]
impl TextModel for MockTextModel {
    async fn complete(&self, request: &TextRequest) -> Result<String, BackendError> {
        if !self.latency.is_zero() {
            tokio::time::sleep(self.latency).await;
        }
        let digest = request_digest(request);
        let pick = |i: usize, n: usize| usize::from(digest[i]) % n;

        if request.trace.agent == AgentKind::Questioning {
            let question = request
                .user_message
                .lines()
                .rev()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("What happens next?");
            return Ok(format!("{} {}", LEAD_INS[pick(0, 4)], question.trim()));
        }

        let input = between(&request.user_message, INPUT_OPEN, INPUT_CLOSE)
            .unwrap_or("an idea nobody had said out loud yet");
        let name = request
            .user_message
            .lines()
            .find_map(|l| l.strip_prefix(PROTAGONIST_LABEL))
            .map(str::trim)
            .unwrap_or("The protagonist");
        let chapter = request.trace.chapter;

        let paragraphs = [
            format!("{}. {name} kept coming back to one thought: \"{input}\"", SETTINGS[pick(1, 4)]),
            format!(
                "In chapter {chapter}, that thought turned into something {name} could act on. {}",
                MIDDLES[pick(2, 4)]
            ),
            format!(
                "{} The people around {name} reacted in ways nobody expected.",
                MIDDLES[pick(3, 4)]
            ),
            TURNS[pick(4, 4)].replace("{name}", name),
        ];
        Ok(paragraphs.join("\n\n"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockImageModel {
    pub latency: Duration,
}

impl MockImageModel {
    pub fn with_latency(latency: Duration) -> Self {
        Self { latency }
    }
}

#[async_trait]
impl ImageModel for MockImageModel {
    async fn render(
        &self,
        request: &ImageRequest,
        _reference: Option<&[u8]>,
    ) -> Result<GeneratedImage, BackendError> {
        if !self.latency.is_zero() {
            tokio::time::sleep(self.latency).await;
        }
        let bytes = serde_json::to_vec(request).expect("request serializes");
        let digest = Sha256::digest(&bytes);
        let background = [digest[0], digest[1], digest[2]];
        let band = [!digest[0], !digest[1], !digest[2]];
        let band_top = u32::from(digest[3]) * (MOCK_IMAGE_SIZE - 96) / 255;

        let size = MOCK_IMAGE_SIZE;
        let mut pixels = Vec::with_capacity((size * size * 3) as usize);
        for y in 0..size {
            let colour = if (band_top..band_top + 96).contains(&y) { band } else { background };
            for _ in 0..size {
                pixels.extend_from_slice(&colour);
            }
        }
        let reference = request
            .reference_image
            .as_ref()
            .map_or("none", |r| r.content_address.as_str());
        let caption = format!("mock:{} ref:{reference}", &sha256_hex(&bytes)[..16]);
        Ok(GeneratedImage {
            bytes: encode_png(size, size, &pixels, &caption)?,
            media_type: MediaType::Png,
            width: size,
            height: size,
        })
    }

    /// Recolours the source toward a tint derived from the style tokens and
    /// frames it with a border, so the result stays correlated with the source.
    async fn stylize(
        &self,
        source: &[u8],
        source_ref: &ImageRef,
        style_tokens: &str,
        _trace: &Trace,
    ) -> Result<GeneratedImage, BackendError> {
        if !self.latency.is_zero() {
            tokio::time::sleep(self.latency).await;
        }
        let decoded = image::load_from_memory(source)
            .map_err(|e| BackendError::InvalidResponse(format!("cannot decode source: {e}")))?;
        let mut rgb = decoded.to_rgb8();
        if rgb.width() > MOCK_IMAGE_SIZE || rgb.height() > MOCK_IMAGE_SIZE {
            let scale = f64::from(MOCK_IMAGE_SIZE) / f64::from(rgb.width().max(rgb.height()));
            let w = ((f64::from(rgb.width()) * scale) as u32).max(1);
            let h = ((f64::from(rgb.height()) * scale) as u32).max(1);
            rgb = image::imageops::thumbnail(&rgb, w, h);
        }

        let style = Sha256::digest(style_tokens.as_bytes());
        let tint = [style[0], style[1], style[2]];
        let frame = tint.map(|c| c / 2);
        let (w, h) = (rgb.width() + 2 * AVATAR_BORDER, rgb.height() + 2 * AVATAR_BORDER);
        let mut pixels = Vec::with_capacity((w * h * 3) as usize);
        for y in 0..h {
            for x in 0..w {
                let inside = (AVATAR_BORDER..w - AVATAR_BORDER).contains(&x)
                    && (AVATAR_BORDER..h - AVATAR_BORDER).contains(&y);
                if inside {
                    let p = rgb.get_pixel(x - AVATAR_BORDER, y - AVATAR_BORDER).0;
                    for c in 0..3 {
                        pixels.push(((u16::from(p[c]) * 3 + u16::from(tint[c])) / 4) as u8);
                    }
                } else {
                    pixels.extend_from_slice(&frame);
                }
            }
        }
        let caption = format!(
            "stylized:{} style:{}",
            source_ref.content_address,
            &sha256_hex(style_tokens.as_bytes())[..16]
        );
        Ok(GeneratedImage {
            bytes: encode_png(w, h, &pixels, &caption)?,
            media_type: MediaType::Png,
            width: w,
            height: h,
        })
    }
}

fn request_digest(request: &TextRequest) -> [u8; 32] {
    let bytes = serde_json::to_vec(request).expect("request serializes");
    Sha256::digest(&bytes).into()
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(text[start..end].trim())
}

/// Encodes 8-bit RGB pixels as PNG with a `Caption` text chunk.
pub fn encode_png(width: u32, height: u32, rgb: &[u8], caption: &str) -> Result<Vec<u8>, BackendError> {
    let encode_err = |e: png::EncodingError| BackendError::InvalidResponse(format!("png encode: {e}"));
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        encoder
            .add_text_chunk("Caption".to_string(), caption.to_string())
            .map_err(encode_err)?;
        let mut writer = encoder.write_header().map_err(encode_err)?;
        writer.write_image_data(rgb).map_err(encode_err)?;
    }
    Ok(out)
}

/// Reads back the `Caption` chunk written by the mock image model.
pub fn png_caption(bytes: &[u8]) -> Option<String> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let reader = decoder.read_info().ok()?;
    reader
        .info()
        .uncompressed_latin1_text
        .iter()
        .find(|c| c.keyword == "Caption")
        .map(|c| c.text.clone())
}
