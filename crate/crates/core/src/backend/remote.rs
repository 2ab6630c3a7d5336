//! HTTP adapters.
//!
//! Text: OpenAI-style chat completions.
//!
//! ```text
//! POST {endpoint}
//! {"model": M, "messages": [{"role": "system", "content": S}, {"role": "user", "content": U}],
//!  "max_tokens": N, "user": "<session>/<chapter>/<agent>"}
//! → {"choices": [{"message": {"content": "..."}}]}
//! ```
//!
//! Image: a JSON images endpoint returning base64 data.
//!
//! ```text
//! POST {endpoint}
//! {"model": M, "prompt": P, "style": T, "size": "768x768", "response_format": "b64_json",
//!  "image": <base64 reference or source, optional>, "user": "..."}
//! → {"data": [{"b64_json": "..."}]}
//! ```

use async_trait::async_trait;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::Deserialize;
use serde_json::json;

use super::{BackendError, GeneratedImage, ImageModel, ImageRef, ImageRequest, MediaType, TextModel, TextRequest, Trace};

const MAX_ERROR_BODY: usize = 512;

fn trace_tag(trace: &Trace) -> String {
    format!("{}/{}/{}", trace.session_id, trace.chapter, trace.agent)
}

fn transport(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else {
        BackendError::Transport(e.to_string())
    }
}

async fn post_json(
    client: &reqwest::Client,
    endpoint: &str,
    api_key: Option<&str>,
    body: &serde_json::Value,
) -> Result<String, BackendError> {
    let mut request = client.post(endpoint).json(body);
    if let Some(key) = api_key {
        request = request.bearer_auth(key);
    }
    let response = request.send().await.map_err(transport)?;
    let status = response.status();
    let text = response.text().await.map_err(transport)?;
    if !status.is_success() {
        let mut message = text;
        message.truncate(MAX_ERROR_BODY);
        return Err(BackendError::RemoteError {
            status: status.as_u16(),
            message,
        });
    }
    if text.trim().is_empty() {
        return Err(BackendError::EmptyResponse);
    }
    Ok(text)
}

#[derive(Debug, Clone)]
pub struct HttpTextModel {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpTextModel {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> Self {
        Self {
            client: reqwest::Client::new(),
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[async_trait]
impl TextModel for HttpTextModel {
    async fn complete(&self, request: &TextRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_directive},
                {"role": "user", "content": request.user_message},
            ],
            // rough chars-per-token budget
            "max_tokens": request.max_length / 3 + 1,
            "user": trace_tag(&request.trace),
        });
        let raw = post_json(&self.client, &self.endpoint, self.api_key.as_deref(), &body).await?;
        let parsed: ChatResponse =
            serde_json::from_str(&raw).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|c| !c.trim().is_empty())
            .ok_or(BackendError::EmptyResponse)
    }
}

#[derive(Debug, Clone)]
pub struct HttpImageModel {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpImageModel {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> Self {
        Self {
            client: reqwest::Client::new(),
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
        }
    }

    async fn call(&self, body: serde_json::Value) -> Result<GeneratedImage, BackendError> {
        let raw = post_json(&self.client, &self.endpoint, self.api_key.as_deref(), &body).await?;
        let parsed: ImagesResponse =
            serde_json::from_str(&raw).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        let encoded = parsed
            .data
            .into_iter()
            .next()
            .and_then(|d| d.b64_json)
            .filter(|b| !b.is_empty())
            .ok_or(BackendError::EmptyResponse)?;
        let bytes = BASE64
            .decode(encoded.trim())
            .map_err(|e| BackendError::InvalidResponse(format!("bad base64: {e}")))?;
        let media_type = MediaType::sniff(&bytes)
            .ok_or_else(|| BackendError::InvalidResponse("image is neither PNG nor JPEG".into()))?;
        let decoded = image::load_from_memory(&bytes)
            .map_err(|e| BackendError::InvalidResponse(format!("undecodable image: {e}")))?;
        Ok(GeneratedImage {
            width: decoded.width(),
            height: decoded.height(),
            bytes,
            media_type,
        })
    }
}

#[derive(Deserialize)]
struct ImagesResponse {
    data: Vec<ImageDatum>,
}

#[derive(Deserialize)]
struct ImageDatum {
    b64_json: Option<String>,
}

#[async_trait]
impl ImageModel for HttpImageModel {
    async fn render(
        &self,
        request: &ImageRequest,
        reference: Option<&[u8]>,
    ) -> Result<GeneratedImage, BackendError> {
        self.call(json!({
            "model": self.model,
            "prompt": request.prompt,
            "style": request.style_tokens,
            "size": "768x768",
            "response_format": "b64_json",
            "image": reference.map(|r| BASE64.encode(r)),
            "user": trace_tag(&request.trace),
        }))
        .await
    }

    async fn stylize(
        &self,
        source: &[u8],
        _source_ref: &ImageRef,
        style_tokens: &str,
        trace: &Trace,
    ) -> Result<GeneratedImage, BackendError> {
        self.call(json!({
            "model": self.model,
            "prompt": format!("Redraw this person as a character portrait, keeping their recognizable features. Style: {style_tokens}"),
            "style": style_tokens,
            "size": "768x768",
            "response_format": "b64_json",
            "image": BASE64.encode(source),
            "user": trace_tag(trace),
        }))
        .await
    }
}
