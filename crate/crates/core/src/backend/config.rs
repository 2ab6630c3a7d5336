//! Backend configuration file.
//!
//! ```toml
//! [text]
//! id = "chat"
//! endpoint = "https://llm.example.org/v1/chat/completions"
//! model = "some-chat-model"
//! api_key_env = "TRIADTALE_TEXT_KEY"
//! timeout_ms = 60000
//! retry_limit = 2
//!
//! [image]
//! endpoint = "mock"
//!
//! [pipeline]
//! chapter_timeout_ms = 120000
//! questioning = "template"
//! ```

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    BackendDescriptor, BackendKind, Backends, HttpImageModel, HttpTextModel, ImageBackend, MockImageModel,
    MockTextModel, TextBackend,
};
use crate::pipeline::PipelineSettings;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read backend config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("backend config: {0}")]
    Parse(String),
    #[error("backend config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub id: String,
    /// HTTP(S) URL, or `mock`.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token, if the service needs one.
    pub api_key_env: Option<String>,
    pub timeout_ms: u64,
    pub retry_limit: u32,
    pub max_in_flight: usize,
    pub retry_backoff_ms: u64,
    /// Artificial delay per mock call.
    pub mock_latency_ms: u64,
}

impl Default for BackendSettings {
    fn default() -> Self {
        Self {
            id: String::new(),
            endpoint: "mock".into(),
            model: String::new(),
            api_key_env: None,
            timeout_ms: 60_000,
            retry_limit: 2,
            max_in_flight: 4,
            retry_backoff_ms: 500,
            mock_latency_ms: 0,
        }
    }
}

impl BackendSettings {
    pub fn is_mock(&self) -> bool {
        self.endpoint == "mock"
    }

    fn descriptor(&self, kind: BackendKind) -> BackendDescriptor {
        let id = if self.id.is_empty() {
            match (kind, self.is_mock()) {
                (BackendKind::Text, true) => "mock-text".to_string(),
                (BackendKind::Image, true) => "mock-image".to_string(),
                (_, false) => self.model.clone(),
            }
        } else {
            self.id.clone()
        };
        BackendDescriptor {
            id,
            kind,
            endpoint: self.endpoint.clone(),
            timeout_ms: self.timeout_ms,
            retry_limit: self.retry_limit,
            max_in_flight: self.max_in_flight,
            retry_backoff_ms: self.retry_backoff_ms,
        }
    }

    fn validate(&self, section: &str) -> Result<(), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(format!("[{section}] {m}"));
        if self.timeout_ms == 0 {
            return Err(invalid("timeout_ms must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(invalid("max_in_flight must be positive".into()));
        }
        if !self.is_mock() {
            if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
                return Err(invalid(format!("endpoint `{}` is neither a URL nor `mock`", self.endpoint)));
            }
            if self.model.is_empty() {
                return Err(invalid("model is required for remote backends".into()));
            }
        }
        Ok(())
    }

    fn api_key(&self, section: &str) -> Result<Option<String>, ConfigError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| {
                ConfigError::Invalid(format!("[{section}] environment variable {var} is not set"))
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub text: BackendSettings,
    pub image: BackendSettings,
    pub pipeline: PipelineSettings,
}

impl BackendConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.text.validate("text")?;
        config.image.validate("image")?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Replaces both backends with the in-process mocks, keeping mock latency
    /// and pipeline settings.
    pub fn force_mock(&mut self) {
        for settings in [&mut self.text, &mut self.image] {
            settings.endpoint = "mock".into();
            settings.id.clear();
            settings.api_key_env = None;
        }
    }

    pub fn build(&self) -> Result<Backends, ConfigError> {
        let text_descriptor = self.text.descriptor(BackendKind::Text);
        let text = if self.text.is_mock() {
            TextBackend::new(
                text_descriptor,
                Arc::new(MockTextModel::with_latency(Duration::from_millis(self.text.mock_latency_ms))),
            )
        } else {
            let model = HttpTextModel::new(&self.text.endpoint, &self.text.model, self.text.api_key("text")?);
            TextBackend::new(text_descriptor, Arc::new(model))
        };

        let image_descriptor = self.image.descriptor(BackendKind::Image);
        let image = if self.image.is_mock() {
            ImageBackend::new(
                image_descriptor,
                Arc::new(MockImageModel::with_latency(Duration::from_millis(self.image.mock_latency_ms))),
            )
        } else {
            let model = HttpImageModel::new(&self.image.endpoint, &self.image.model, self.image.api_key("image")?);
            ImageBackend::new(image_descriptor, Arc::new(model))
        };
        Ok(Backends { text, image })
    }
}
