use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use hidss_core::guidance::GuidanceError;
use hidss_core::learning::LearningError;
use hidss_core::matching::MatchingError;
use hidss_core::ontology::OntologyError;
use hidss_core::repository::RepoError;
use serde::{Deserialize, Serialize};

use crate::http::canonical_response;

/// One machine-readable problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub code: String,
    pub message: String,
    pub field: Option<String>,
}

impl Problem {
    pub fn new(code: &str, message: impl Into<String>, field: Option<&str>) -> Self {
        Self { code: code.to_owned(), message: message.into(), field: field.map(str::to_owned) }
    }
}

/// Error returned by every service operation. Rendered as a list of
/// [`Problem`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub problems: Vec<Problem>,
}

impl ApiError {
    pub fn one(status: StatusCode, code: &str, message: impl Into<String>, field: Option<&str>) -> Self {
        Self { status, problems: vec![Problem::new(code, message, field)] }
    }

    pub fn bad_request(code: &str, message: impl Into<String>, field: Option<&str>) -> Self {
        Self::one(StatusCode::BAD_REQUEST, code, message, field)
    }

    pub fn not_found(code: &str, message: impl Into<String>, field: Option<&str>) -> Self {
        Self::one(StatusCode::NOT_FOUND, code, message, field)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::one(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, None)
    }

    /// Code of the first problem.
    pub fn code(&self) -> &str {
        self.problems.first().map_or("", |p| p.code.as_str())
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let messages: Vec<_> = self.problems.iter().map(|p| format!("{}: {}", p.code, p.message)).collect();
        write!(f, "{} ({})", messages.join("; "), self.status)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        canonical_response(self.status, &self.problems)
    }
}

impl From<RepoError> for ApiError {
    fn from(err: RepoError) -> Self {
        use StatusCode as S;
        let message = err.to_string();
        match err {
            RepoError::UnknownVenture(_) => Self::not_found("unknown_venture", message, Some("venture_id")),
            RepoError::UnknownVersion(_) => Self::not_found("unknown_version", message, Some("version")),
            RepoError::DuplicateVenture(_) => Self::one(S::CONFLICT, "duplicate_venture", message, Some("venture_id")),
            RepoError::VersionOutOfOrder { .. } => Self::one(S::CONFLICT, "stale_base", message, Some("base_version")),
            RepoError::InvalidModel(errors) => Self {
                status: S::UNPROCESSABLE_ENTITY,
                problems: errors.iter().map(|e| Problem::new(e.code(), e.message(), Some(&e.field()))).collect(),
            },
            RepoError::InvalidJudgment(errors) => Self {
                status: S::UNPROCESSABLE_ENTITY,
                problems: errors
                    .iter()
                    .map(|e| Problem::new(e.code(), e.message(), Some(&format!("ratings.{}", e.criterion()))))
                    .collect(),
            },
            RepoError::UnknownMentor(_) => {
                Self::one(S::UNPROCESSABLE_ENTITY, "unknown_mentor", message, Some("mentor_id"))
            }
            RepoError::DuplicateOutcome { .. } => {
                Self::one(S::CONFLICT, "duplicate_outcome", message, Some("milestone"))
            }
            RepoError::NoVersions(_) => Self::one(S::CONFLICT, "no_versions", message, None),
            RepoError::OutcomeNotLatest { .. } => {
                Self::one(S::CONFLICT, "outcome_not_latest", message, Some("version"))
            }
            RepoError::Invalid(_) => Self::one(S::UNPROCESSABLE_ENTITY, "invalid", message, None),
            RepoError::SequenceGap { .. } | RepoError::Corrupt { .. } | RepoError::Io(_) | RepoError::Serde(_) => {
                Self::one(S::INTERNAL_SERVER_ERROR, "storage", message, None)
            }
        }
    }
}

impl From<LearningError> for ApiError {
    fn from(err: LearningError) -> Self {
        match err {
            LearningError::NoModels | LearningError::NoModel { .. } => Self::one(
                StatusCode::SERVICE_UNAVAILABLE,
                "cold_start",
                format!("{err}; seed labeled ventures and train (`hidss seed`, `hidss train` or POST /admin/retrain)"),
                None,
            ),
            other => Self::internal(other.to_string()),
        }
    }
}

impl From<OntologyError> for ApiError {
    fn from(err: OntologyError) -> Self {
        match err {
            OntologyError::StaleBase { .. } => {
                Self::one(StatusCode::CONFLICT, "stale_base", err.to_string(), Some("base_version"))
            }
            OntologyError::Invalid(errors) => RepoError::InvalidModel(errors).into(),
            other => Self::one(StatusCode::UNPROCESSABLE_ENTITY, "invalid_model", other.to_string(), None),
        }
    }
}

impl From<MatchingError> for ApiError {
    fn from(err: MatchingError) -> Self {
        let message = err.to_string();
        match err {
            MatchingError::ZeroK => Self::bad_request("invalid_k", message, Some("k")),
            MatchingError::EmptyPool => Self::one(StatusCode::CONFLICT, "empty_pool", message, None),
            MatchingError::NoTags(_) => {
                Self::one(StatusCode::UNPROCESSABLE_ENTITY, "no_expertise", message, Some("expertise"))
            }
            MatchingError::InvalidWeights(_) => Self::internal(message),
        }
    }
}

impl From<GuidanceError> for ApiError {
    fn from(err: GuidanceError) -> Self {
        Self::internal(err.to_string())
    }
}
