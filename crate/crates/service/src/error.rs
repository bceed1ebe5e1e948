use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use dosefind_core::{Error, FieldError};
use serde::Serialize;

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Conflict {
        message: String,
        current_version: Option<u64>,
    },
    Invalid {
        message: String,
        fields: Vec<FieldError>,
    },
    Unavailable(String),
    Internal(String),
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "<[FieldError]>::is_empty")]
    fields: &'a [FieldError],
    #[serde(skip_serializing_if = "Option::is_none")]
    current_version: Option<u64>,
}

impl ApiError {
    pub fn invalid(message: impl Into<String>) -> Self {
        ApiError::Invalid {
            message: message.into(),
            fields: Vec::new(),
        }
    }

    pub fn field(field: &str, message: impl Into<String>) -> Self {
        let message = message.into();
        ApiError::Invalid {
            fields: vec![FieldError::new(field, message.clone())],
            message: format!("{field}: {message}"),
        }
    }

    /// A request body that failed to deserialize.
    pub fn body(err: &serde_json::Error) -> Self {
        let message = err.to_string();
        let field = message
            .strip_prefix("missing field `")
            .or_else(|| message.strip_prefix("unknown field `"))
            .and_then(|rest| rest.split('`').next());
        match field {
            Some(f) => ApiError::Invalid {
                fields: vec![FieldError::new(f, message.clone())],
                message,
            },
            None => ApiError::invalid(message),
        }
    }

    pub fn stale(expected: u64, current: u64) -> Self {
        ApiError::Conflict {
            message: format!("expected version {expected} but the trial is at version {current}"),
            current_version: Some(current),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(fields) => ApiError::Invalid {
                message: Error::InvalidParams(fields.clone()).to_string(),
                fields,
            },
            Error::Inactive(_) | Error::StillActive => ApiError::Conflict {
                message: e.to_string(),
                current_version: None,
            },
            Error::Io(_) => ApiError::Internal(e.to_string()),
            _ => ApiError::invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message, fields, current_version) = match &self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, "not_found", m, &[][..], None),
            ApiError::Conflict {
                message,
                current_version,
            } => (
                StatusCode::CONFLICT,
                "conflict",
                message,
                &[][..],
                *current_version,
            ),
            ApiError::Invalid { message, fields } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid",
                message,
                fields.as_slice(),
                None,
            ),
            ApiError::Unavailable(m) => (
                StatusCode::SERVICE_UNAVAILABLE,
                "unavailable",
                m,
                &[][..],
                None,
            ),
            ApiError::Internal(m) => {
                tracing::error!("{m}");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    "internal",
                    m,
                    &[][..],
                    None,
                )
            }
        };
        let body = Body {
            error: code,
            message,
            fields,
            current_version,
        };
        (status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
