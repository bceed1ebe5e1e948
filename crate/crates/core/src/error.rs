use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// A validation failure attributed to one named input field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {}", join_fields(.0))]
    InvalidParams(Vec<FieldError>),

    #[error("no data at dose: a decision needs at least one treated patient")]
    NoData,

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("trial is not active (status {0})")]
    Inactive(String),

    #[error("trial is still active")]
    StillActive,

    #[error("argument mismatch: {0}")]
    Mismatch(String),

    #[error("scenario record {index}{}: {message}", label.as_ref().map(|l| format!(" ({l})")).unwrap_or_default())]
    Scenario {
        index: usize,
        label: Option<String>,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
