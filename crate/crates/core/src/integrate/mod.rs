//! Integration of normalized readings into an OCEL log.
//!
//! An [`IntegrationSpec`] says which device type's readings attach to which
//! activity or object type, how readings are correlated with events or
//! objects, how matched values are reduced and which qualifier links the
//! materialized devices. [`plan`] is a dry run; [`execute`] recomputes the
//! same values and emits an [`crate::ocel::AdditionSet`].

mod correlate;
mod engine;
mod manipulate;
mod spec;

pub use correlate::{correlate, MatchSet};
pub use engine::{
    execute, plan, plan_with_limit, select_readings, ComputedValue, EnrichmentPlan, EnrichmentReport, MatchGroup,
    DEFAULT_PREVIEW_LIMIT, DEVICE_ATTRIBUTES,
};
pub use manipulate::{aggregate, filter_range};
pub use spec::{
    AggFn, CorrelationMode, CorrelationRule, IntegrationSpec, Manipulation, ManipulationKind, Pattern, Target,
    ValueRange,
};

use crate::ocel::OcelError;

#[derive(Debug, thiserror::Error)]
pub enum IntegrationError {
    #[error("invalid spec at {field}: {message}")]
    Spec { field: String, message: String },
    #[error("invalid range at {field}: {message}")]
    Range { field: String, message: String },
    #[error("attribute {attribute:?} already exists on {target:?}")]
    AttributeCollision { target: String, attribute: String },
    #[error("{kind} {name:?} not found")]
    NotFound { kind: &'static str, name: String },
    #[error("correlation error: {0}")]
    Correlation(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("aggregation over an empty value list")]
    EmptyAggregation,
    #[error("plan is stale: inputs changed since planning")]
    PlanInvalidated { expected: String, actual: String },
    #[error(transparent)]
    Ocel(#[from] OcelError),
}

impl IntegrationError {
    pub(crate) fn spec(field: &str, message: impl Into<String>) -> Self {
        IntegrationError::Spec { field: field.to_string(), message: message.into() }
    }

    /// Dotted path of the offending spec field, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            IntegrationError::Spec { field, .. } | IntegrationError::Range { field, .. } => Some(field),
            IntegrationError::AttributeCollision { .. } => Some("attribute_name"),
            _ => None,
        }
    }
}

pub type Result<T, E = IntegrationError> = std::result::Result<T, E>;
