//! At-most-once handling of retried POSTs.
//!
//! A request carrying `Idempotency-Key` runs once per (key, method, path).
//! Retries, including ones that arrive while the first is still running,
//! wait for it and receive its stored response.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{HeaderMap, Method, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use tokio::sync::OnceCell;

use crate::error::ApiError;

pub const HEADER: &str = "idempotency-key";
const MAX_KEY_LEN: usize = 200;
const MAX_STORED_BODY: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
struct Stored {
    status: StatusCode,
    headers: HeaderMap,
    body: Bytes,
}

#[derive(Debug, Default, Clone)]
pub struct IdempotencyCache {
    entries: Arc<Mutex<HashMap<String, Arc<OnceCell<Stored>>>>>,
}

impl IdempotencyCache {
    fn slot(&self, key: String) -> Arc<OnceCell<Stored>> {
        self.entries
            .lock()
            .expect("idempotency cache poisoned")
            .entry(key)
            .or_default()
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("idempotency cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub async fn layer(State(cache): State<IdempotencyCache>, request: Request, next: Next) -> Response {
    if request.method() != Method::POST {
        return next.run(request).await;
    }
    let Some(key) = request.headers().get(HEADER) else {
        return next.run(request).await;
    };
    let key = match key.to_str() {
        Ok(k) if !k.is_empty() && k.len() <= MAX_KEY_LEN => k.to_string(),
        _ => return ApiError::invalid_request("malformed Idempotency-Key header").into_response(),
    };

    let slot = cache.slot(format!("{} {} {key}", request.method(), request.uri().path()));
    let stored = slot
        .get_or_init(|| async move {
            let response = next.run(request).await;
            let (parts, body) = response.into_parts();
            let body = axum::body::to_bytes(body, MAX_STORED_BODY).await.unwrap_or_default();
            Stored {
                status: parts.status,
                headers: parts.headers,
                body,
            }
        })
        .await
        .clone();

    let mut response = Response::new(Body::from(stored.body));
    *response.status_mut() = stored.status;
    *response.headers_mut() = stored.headers;
    response
}
