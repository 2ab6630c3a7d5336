//! Vendor-neutral text and image generation.
//!
//! A backend is a [`TextModel`] or [`ImageModel`] wrapped in a handle that
//! applies the descriptor's per-attempt timeout, attempt limit and in-flight
//! limit uniformly, whether the model is remote or the in-process mock.

pub mod config;
pub mod mock;
pub mod remote;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::blob::{BlobError, BlobStore};

pub use config::{BackendConfig, BackendSettings, ConfigError};
pub use mock::{MockImageModel, MockTextModel};
pub use remote::{HttpImageModel, HttpTextModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaType {
    Png,
    Jpeg,
}

impl MediaType {
    pub fn mime(self) -> &'static str {
        match self {
            MediaType::Png => "image/png",
            MediaType::Jpeg => "image/jpeg",
        }
    }

    pub fn from_mime(mime: &str) -> Option<Self> {
        match mime.split(';').next()?.trim() {
            "image/png" => Some(MediaType::Png),
            "image/jpeg" | "image/jpg" => Some(MediaType::Jpeg),
            _ => None,
        }
    }

    /// Detects PNG or JPEG from magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(MediaType::Png)
        } else if bytes.starts_with(&[0xff, 0xd8, 0xff]) {
            Some(MediaType::Jpeg)
        } else {
            None
        }
    }
}

/// A stored image, addressed by the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub content_address: String,
    pub media_type: MediaType,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Questioning,
    Writing,
    Drawing,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Questioning => "questioning",
            AgentKind::Writing => "writing",
            AgentKind::Drawing => "drawing",
        })
    }
}

/// Where a request came from. `chapter` is 0 for character construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trace {
    pub session_id: String,
    pub chapter: u8,
    pub agent: AgentKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRequest {
    pub system_directive: String,
    pub user_message: String,
    pub trace: Trace,
    /// Response cap in characters.
    pub max_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRequest {
    pub prompt: String,
    pub reference_image: Option<ImageRef>,
    pub style_tokens: String,
    pub trace: Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Text,
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub id: String,
    pub kind: BackendKind,
    /// Remote URL, or `mock`.
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Maximum number of attempts per call (values below 1 behave as 1).
    pub retry_limit: u32,
    pub max_in_flight: usize,
    pub retry_backoff_ms: u64,
}

impl BackendDescriptor {
    pub fn mock(id: &str, kind: BackendKind) -> Self {
        Self {
            id: id.into(),
            kind,
            endpoint: "mock".into(),
            timeout_ms: 30_000,
            retry_limit: 1,
            max_in_flight: 4,
            retry_backoff_ms: 0,
        }
    }

    fn attempts(&self) -> u32 {
        self.retry_limit.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend timed out")]
    Timeout,
    #[error("remote returned HTTP {status}: {message}")]
    RemoteError { status: u16, message: String },
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed backend response: {0}")]
    InvalidResponse(String),
    #[error("image store: {0}")]
    Storage(String),
}

impl BackendError {
    /// Errors worth another attempt: timeouts, rate limits, server errors and
    /// connection failures.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Transport(_) => true,
            BackendError::RemoteError { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BackendError::Timeout => "Timeout",
            BackendError::RemoteError { .. } => "RemoteError",
            BackendError::EmptyResponse => "EmptyResponse",
            BackendError::Transport(_) => "Transport",
            BackendError::InvalidResponse(_) => "InvalidResponse",
            BackendError::Storage(_) => "Storage",
        }
    }
}

impl From<BlobError> for BackendError {
    fn from(e: BlobError) -> Self {
        BackendError::Storage(e.to_string())
    }
}

/// Encoded image bytes as produced by a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedImage {
    pub bytes: Vec<u8>,
    pub media_type: MediaType,
    pub width: u32,
    pub height: u32,
}

#[async_trait]
pub trait TextModel: Send + Sync {
    async fn complete(&self, request: &TextRequest) -> Result<String, BackendError>;
}

#[async_trait]
pub trait ImageModel: Send + Sync {
    /// Renders an illustration. `reference` holds the bytes of
    /// `request.reference_image` when one is set.
    async fn render(
        &self,
        request: &ImageRequest,
        reference: Option<&[u8]>,
    ) -> Result<GeneratedImage, BackendError>;

    /// Image-to-image stylization of a source photo or sketch.
    async fn stylize(
        &self,
        source: &[u8],
        source_ref: &ImageRef,
        style_tokens: &str,
        trace: &Trace,
    ) -> Result<GeneratedImage, BackendError>;
}

/// Runs `call` under the descriptor's timeout and attempt policy.
async fn with_policy<T, F, Fut>(descriptor: &BackendDescriptor, mut call: F) -> Result<T, BackendError>
where
    F: FnMut() -> Fut,
    Fut: std::future::Future<Output = Result<T, BackendError>>,
{
    let per_attempt = Duration::from_millis(descriptor.timeout_ms.max(1));
    let mut last = BackendError::Timeout;
    for attempt in 1..=descriptor.attempts() {
        if attempt > 1 && descriptor.retry_backoff_ms > 0 {
            tokio::time::sleep(Duration::from_millis(
                descriptor.retry_backoff_ms * u64::from(attempt - 1),
            ))
            .await;
        }
        match tokio::time::timeout(per_attempt, call()).await {
            Err(_) => last = BackendError::Timeout,
            Ok(Ok(value)) => return Ok(value),
            Ok(Err(e)) if e.is_transient() => last = e,
            Ok(Err(e)) => return Err(e),
        }
        tracing::debug!(backend = %descriptor.id, attempt, error = %last, "backend attempt failed");
    }
    Err(last)
}

/// Shareable handle over a text model.
#[derive(Clone)]
pub struct TextBackend {
    descriptor: BackendDescriptor,
    model: Arc<dyn TextModel>,
    permits: Arc<Semaphore>,
}

impl TextBackend {
    pub fn new(descriptor: BackendDescriptor, model: Arc<dyn TextModel>) -> Self {
        let permits = Arc::new(Semaphore::new(descriptor.max_in_flight.max(1)));
        Self {
            descriptor,
            model,
            permits,
        }
    }

    pub fn mock() -> Self {
        Self::new(
            BackendDescriptor::mock("mock-text", BackendKind::Text),
            Arc::new(MockTextModel::default()),
        )
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    /// Returns non-empty text of at most `request.max_length` characters.
    pub async fn generate_text(&self, request: &TextRequest) -> Result<String, BackendError> {
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        let text = with_policy(&self.descriptor, || self.model.complete(request)).await?;
        if text.trim().is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(truncate_at_paragraph(&text, request.max_length))
    }
}

/// Shareable handle over an image model; results land in a [`BlobStore`].
#[derive(Clone)]
pub struct ImageBackend {
    descriptor: BackendDescriptor,
    model: Arc<dyn ImageModel>,
    permits: Arc<Semaphore>,
}

impl ImageBackend {
    pub fn new(descriptor: BackendDescriptor, model: Arc<dyn ImageModel>) -> Self {
        let permits = Arc::new(Semaphore::new(descriptor.max_in_flight.max(1)));
        Self {
            descriptor,
            model,
            permits,
        }
    }

    pub fn mock() -> Self {
        Self::new(
            BackendDescriptor::mock("mock-image", BackendKind::Image),
            Arc::new(MockImageModel::default()),
        )
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub async fn generate_image(
        &self,
        request: &ImageRequest,
        store: &BlobStore,
    ) -> Result<ImageRef, BackendError> {
        let reference = match &request.reference_image {
            Some(r) => Some(store.get(&r.content_address)?),
            None => None,
        };
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        let image = with_policy(&self.descriptor, || {
            self.model.render(request, reference.as_deref())
        })
        .await?;
        Ok(store.put_image(&image)?)
    }

    pub async fn stylize_avatar(
        &self,
        source: &ImageRef,
        style_tokens: &str,
        store: &BlobStore,
        trace: &Trace,
    ) -> Result<ImageRef, BackendError> {
        let bytes = store.get(&source.content_address)?;
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        let image = with_policy(&self.descriptor, || {
            self.model.stylize(&bytes, source, style_tokens, trace)
        })
        .await?;
        Ok(store.put_image(&image)?)
    }
}

/// The pair of backends a service runs with.
#[derive(Clone)]
pub struct Backends {
    pub text: TextBackend,
    pub image: ImageBackend,
}

impl Backends {
    pub fn mock() -> Self {
        Self {
            text: TextBackend::mock(),
            image: ImageBackend::mock(),
        }
    }
}

/// Cuts `text` to at most `max_chars` characters, preferring the last
/// paragraph boundary that fits.
pub fn truncate_at_paragraph(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        return text.to_string();
    }
    let cut = text
        .char_indices()
        .nth(max_chars)
        .map_or(text.len(), |(i, _)| i);
    let head = &text[..cut];
    match head.rfind("\n\n") {
        Some(boundary) if boundary > 0 => head[..boundary].trim_end().to_string(),
        _ => head.to_string(),
    }
}
