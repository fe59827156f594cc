use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use shadowtale::script::LineError;
use shadowtale::{EngineError, EntityId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Location {
    pub line: usize,
    pub col: usize,
}

/// Error body shared by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ApiError {
    pub http_status: u16,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<Location>,
    /// Narration only: ids inserted before the failing line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inserted: Option<Vec<EntityId>>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            http_status: status.as_u16(),
            code,
            message: message.into(),
            location: None,
            inserted: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn busy() -> Self {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "bad_request",
            "write queue is full, retry later",
        )
    }

    pub fn at(mut self, line: usize, col: usize) -> Self {
        self.location = Some(Location { line, col });
        self
    }

    pub fn with_inserted(mut self, inserted: Vec<EntityId>) -> Self {
        self.inserted = Some(inserted);
        self
    }

    pub fn from_line(line: usize, err: LineError) -> Self {
        let code = err.code();
        let status = match code {
            "unknown_id" => StatusCode::NOT_FOUND,
            "io_error" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let code = if code == "io_error" {
            "bad_request"
        } else {
            code
        };
        ApiError::new(status, code, err.kind.to_string()).at(line, err.column)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::BadPosition { .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, "bad_position", e.to_string())
            }
            EngineError::UnknownOwner(_) | EngineError::UnknownInstance(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_id", e.to_string())
            }
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
