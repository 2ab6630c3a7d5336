use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use triadtale_core::{EngineError, SessionPhase};

/// Wire form of every failure: `{code, message, phase}`.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub phase: Option<SessionPhase>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                phase: None,
            },
        }
    }

    pub fn invalid_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidRequest", message)
    }
}

pub fn status_for(code: &str) -> StatusCode {
    match code {
        "Unauthorized" => StatusCode::UNAUTHORIZED,
        "WrongActor" => StatusCode::FORBIDDEN,
        "SessionNotFound" | "JobNotFound" | "ImageNotFound" | "UnknownScenario" | "UnknownParticipant" => {
            StatusCode::NOT_FOUND
        }
        "WrongPhase" | "IllegalTransition" | "RoleTaken" | "ParticipantHasRole" | "GroupFull" | "NoAvatar"
        | "NoSourceImage" => StatusCode::CONFLICT,
        "TooLarge" => StatusCode::PAYLOAD_TOO_LARGE,
        "UnsupportedMedia" => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        "InvalidInput" | "InvalidName" | "InvalidSegment" | "InvalidRequest" => StatusCode::UNPROCESSABLE_ENTITY,
        "StorageFull" => StatusCode::INSUFFICIENT_STORAGE,
        "ShuttingDown" => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let code = e.code();
        let status = status_for(code);
        if status.is_server_error() {
            tracing::error!(error = %e, code, "request failed");
        }
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: e.to_string(),
                phase: e.phase(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
