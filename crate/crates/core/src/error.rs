//! Crate-wide error with stable codes and process exit statuses.

use thiserror::Error;

use crate::bt::BtError;
use crate::eval::EvalError;
use crate::geodesy::GeoError;
use crate::kb::KbError;
use crate::retrieval::RetrievalError;
use crate::routing::RouteError;
use crate::sim::SimError;

/// Exit status for a run that completed but whose mission failed.
pub const EXIT_MISSION_FAILURE: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_INTERNAL_ERROR: i32 = 3;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Bt(#[from] BtError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Kb(_) => "kb",
            Error::Geo(_) => "geodesy",
            Error::Retrieval(_) => "retrieval",
            Error::Route(_) => "routing",
            Error::Bt(_) => "mission_plan",
            Error::Sim(_) => "sim",
            Error::Eval(_) => "eval",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Internal(_) => "internal",
        }
    }

    /// 2 for bad inputs, 3 for defects and environment failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) | Error::Retrieval(RetrievalError::Scorer(_)) => EXIT_INTERNAL_ERROR,
            Error::Sim(SimError::Io(_)) => EXIT_INTERNAL_ERROR,
            _ => EXIT_INPUT_ERROR,
        }
    }

    /// `{"error": {"code", "message", "exit_code"}}` plus a location when the
    /// source reports one.
    pub fn to_json(&self) -> serde_json::Value {
        let mut body = serde_json::json!({
            "code": self.code(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        let location = match self {
            Error::Kb(KbError::Xml { line, column, .. }) | Error::Kb(KbError::InvalidElement { line, column, .. }) => {
                Some((*line, *column))
            }
            Error::Bt(BtError::Schema { line, column, .. }) => Some((*line, *column)),
            _ => None,
        };
        if let Some((line, column)) = location {
            body["line"] = line.into();
            body["column"] = column.into();
        }
        serde_json::json!({ "error": body })
    }
}
