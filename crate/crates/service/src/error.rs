//! Structured error bodies: `{"code", "message", "detail"}`.
//!
//! | code | status |
//! |------|--------|
//! | `invalid_request` | 400 |
//! | `unknown_session`, `unknown_draft`, `unknown_constraint`, `no_report`, `unknown_schema` | 404 |
//! | `session_busy`, `session_exists`, `invalid_state`, `no_confirmed_rules` | 409 |
//! | `weight_out_of_range`, `invalid_config`, `empty_prompt`, `duplicate_id`, `unconfirmed_constraint` | 422 |
//! | `llm_unavailable`, `unparseable_llm_output`, `param_mismatch`, `unknown_entity`, `template_error` | 502 |
//! | `storage_error`, `internal_error` | 500 |

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use planverify_core::replan::LoopError;
use serde::{Deserialize, Serialize};

use crate::store::StoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub detail: serde_json::Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            detail: serde_json::Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session {id:?}"),
        )
        .with_detail(serde_json::json!({ "session_id": id }))
    }

    pub fn busy(id: &str) -> Self {
        ApiError::new(
            StatusCode::CONFLICT,
            "session_busy",
            format!("session {id:?} is being modified by another request"),
        )
        .with_detail(serde_json::json!({ "session_id": id }))
    }
}

fn status_of(code: &str) -> StatusCode {
    match code {
        "unknown_draft" | "unknown_constraint" => StatusCode::NOT_FOUND,
        "invalid_state" | "no_confirmed_rules" => StatusCode::CONFLICT,
        "weight_out_of_range"
        | "invalid_config"
        | "empty_prompt"
        | "duplicate_id"
        | "unconfirmed_constraint" => StatusCode::UNPROCESSABLE_ENTITY,
        "llm_unavailable"
        | "unparseable_llm_output"
        | "param_mismatch"
        | "unknown_entity"
        | "template_error" => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<LoopError> for ApiError {
    fn from(e: LoopError) -> Self {
        let code = e.code();
        let detail = match &e {
            LoopError::UnknownDraft(id) => serde_json::json!({ "draft_id": id }),
            LoopError::UnknownConstraint(id) => serde_json::json!({ "constraint_id": id }),
            LoopError::InvalidState { expected, found } => {
                serde_json::json!({ "expected": expected, "found": found })
            }
            _ => serde_json::Value::Null,
        };
        ApiError::new(status_of(code), code, e.to_string()).with_detail(detail)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "storage_error",
            e.to_string(),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
