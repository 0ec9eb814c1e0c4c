use serde::Serialize;
use serde_json::Value;

use gridplan::engine::Rejection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    NotFound,
    BadRequest,
    Illegal,
    Conflict,
    Internal,
}

/// Error body of every failed request: `{code, message, detail}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceError {
    #[serde(skip)]
    pub kind: ErrorKind,
    pub code: String,
    pub message: String,
    pub detail: Value,
}

impl ServiceError {
    pub fn new(kind: ErrorKind, code: &str, message: impl Into<String>) -> Self {
        ServiceError {
            kind,
            code: code.to_string(),
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).unwrap_or(Value::Null);
        self
    }

    pub fn unknown(what: &str, id: &str) -> Self {
        ServiceError::new(ErrorKind::NotFound, &format!("unknown_{what}"), format!("unknown {what} `{id}`"))
            .with_detail(serde_json::json!({ what: id }))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ServiceError::new(ErrorKind::BadRequest, "bad_request", message)
    }

    pub fn rejected(rejection: &Rejection) -> Self {
        ServiceError::new(ErrorKind::Illegal, "illegal_action", rejection.to_string()).with_detail(rejection)
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ServiceError {}

impl From<gridplan::Error> for ServiceError {
    fn from(e: gridplan::Error) -> Self {
        ServiceError::bad_request(e.to_string())
    }
}
