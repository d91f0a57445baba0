use serde::{Deserialize, Serialize};

use crate::integrate::IntegrationError;
use crate::iot::IotError;
use crate::ocel::OcelError;
use crate::scenario::ScenarioError;
use crate::workspace::WorkspaceError;

/// Coarse error classes shared by exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Validation,
    NotFound,
    Conflict,
    Locked,
    Integrity,
    Internal,
}

impl ErrorClass {
    /// Process exit code; 2 is left to argument parsing.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Internal => 1,
            ErrorClass::Validation => 3,
            ErrorClass::NotFound => 4,
            ErrorClass::Conflict => 5,
            ErrorClass::Locked => 6,
            ErrorClass::Integrity => 7,
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            ErrorClass::Validation | ErrorClass::Integrity => 422,
            ErrorClass::NotFound => 404,
            ErrorClass::Conflict => 409,
            ErrorClass::Locked => 423,
            ErrorClass::Internal => 500,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Iot(#[from] IotError),
    #[error(transparent)]
    Ocel(#[from] OcelError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid input at {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{0} not found")]
    NotFound(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), message: message.into() }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Iot(IotError::Mapping(_)) => "mapping_error",
            Error::Iot(IotError::Table(_) | IotError::Csv(_)) => "malformed_table",
            Error::Iot(IotError::Io(_)) | Error::Io(_) => "io_error",
            Error::Ocel(e) => ocel_code(e),
            Error::Integration(e) => match e {
                IntegrationError::Spec { .. } => "spec_error",
                IntegrationError::Range { .. } => "range_error",
                IntegrationError::AttributeCollision { .. } => "attribute_collision",
                IntegrationError::NotFound { .. } => "not_found",
                IntegrationError::Correlation(_) => "correlation_error",
                IntegrationError::TypeMismatch(_) => "type_mismatch",
                IntegrationError::EmptyAggregation => "empty_aggregation",
                IntegrationError::PlanInvalidated { .. } => "plan_invalidated",
                IntegrationError::Ocel(e) => ocel_code(e),
            },
            Error::Workspace(e) => match e {
                WorkspaceError::SchemaRequired => "schema_required",
                WorkspaceError::TypeMismatch(_) => "type_mismatch",
                WorkspaceError::EmptyUpload(_) => "empty_upload",
                WorkspaceError::HashMismatch { .. } => "hash_mismatch",
                WorkspaceError::NotFound(_) => "not_found",
                WorkspaceError::Ledger(_) => "ledger_error",
                WorkspaceError::Parquet(_) | WorkspaceError::Arrow(_) => "malformed_table",
                WorkspaceError::Io(_) => "io_error",
            },
            Error::Scenario(e) => match e {
                ScenarioError::Param(_) => "param_error",
                ScenarioError::Ocel(e) => ocel_code(e),
                ScenarioError::Iot(_) | ScenarioError::Io(_) | ScenarioError::Json(_) => "io_error",
            },
            Error::Invalid { .. } => "invalid_input",
            Error::NotFound(_) => "not_found",
            Error::Json(_) => "invalid_json",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.code() {
            "not_found" => ErrorClass::NotFound,
            "attribute_collision" | "plan_invalidated" | "migration_conflict" | "already_exists" => {
                ErrorClass::Conflict
            }
            "lease_held" => ErrorClass::Locked,
            "integrity_error" | "hash_mismatch" => ErrorClass::Integrity,
            "io_error" | "ledger_error" | "injected_fault" | "storage_error" => ErrorClass::Internal,
            _ => ErrorClass::Validation,
        }
    }

    /// Dotted path of the offending input field, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Integration(e) => e.field(),
            Error::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

fn ocel_code(e: &OcelError) -> &'static str {
    match e {
        OcelError::Schema(_) => "schema_error",
        OcelError::Integrity(_) => "integrity_error",
        OcelError::MigrationConflict { .. } => "migration_conflict",
        OcelError::InvalidAdditions(_) => "invalid_additions",
        OcelError::NotFound { .. } => "not_found",
        OcelError::LeaseHeld(_) => "lease_held",
        OcelError::AlreadyExists(_) => "already_exists",
        OcelError::InjectedFault(_) => "injected_fault",
        OcelError::Sqlite(rusqlite::Error::SqliteFailure(f, _))
            if matches!(f.code, rusqlite::ErrorCode::NotADatabase | rusqlite::ErrorCode::DatabaseCorrupt) =>
        {
            "schema_error"
        }
        OcelError::Sqlite(_) => "storage_error",
        OcelError::Io(_) => "io_error",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_map_to_distinct_exit_codes() {
        use ErrorClass::*;
        let codes: std::collections::BTreeSet<_> =
            [Validation, NotFound, Conflict, Locked, Integrity, Internal].iter().map(|c| c.exit_code()).collect();
        assert_eq!(codes.len(), 6);
        assert!(!codes.contains(&2) && !codes.contains(&0));
    }

    #[test]
    fn collision_is_a_conflict() {
        let e = Error::from(IntegrationError::AttributeCollision { target: "A".into(), attribute: "x".into() });
        assert_eq!(e.class(), ErrorClass::Conflict);
        assert_eq!(e.class().http_status(), 409);
        assert_eq!(e.field(), Some("attribute_name"));
        let e = Error::from(OcelError::LeaseHeld("x".into()));
        assert_eq!(e.class().http_status(), 423);
    }
}
