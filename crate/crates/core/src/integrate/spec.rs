use serde::{Deserialize, Serialize};

use super::{IntegrationError, Result};
use crate::ocel::OcelLog;

/// Where computed values are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// New column on one activity's event table.
    EventAttribute,
    /// New temporal attribute on one object type.
    ObjectAttribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    ExplicitEventKey,
    ExplicitObjectKey,
    TimeWindow,
    LifecycleSpan,
}

/// How readings join to events or objects.
///
/// - `explicit_event_key`: `reading.event_ref` names the event (or, for
///   object targets, an event related to the object).
/// - `explicit_object_key`: `reading.object_ref` names the object (or, for
///   activity targets, an object related to the event; `object_type_scope`
///   then restricts the referenced object's type).
/// - `time_window`: the reading time lies in
///   `[event.time - window_before_ms, event.time + window_after_ms]` of the
///   event (for object targets: of any event related to the object).
/// - `lifecycle_span`: the reading time lies between the first and last
///   related event of the object (for activity targets: of any object
///   related to the event, restricted to `object_type_scope` when set).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorrelationRule {
    pub mode: CorrelationMode,
    #[serde(default)]
    pub window_before_ms: i64,
    #[serde(default)]
    pub window_after_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_type_scope: Option<String>,
}

impl CorrelationRule {
    pub fn new(mode: CorrelationMode) -> Self {
        CorrelationRule { mode, window_before_ms: 0, window_after_ms: 0, object_type_scope: None }
    }

    pub fn window(before_ms: i64, after_ms: i64) -> Self {
        CorrelationRule { window_before_ms: before_ms, window_after_ms: after_ms, ..Self::new(CorrelationMode::TimeWindow) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == CorrelationMode::TimeWindow && (self.window_before_ms < 0 || self.window_after_ms < 0) {
            return Err(IntegrationError::spec("correlation.window", "window durations must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFn {
    Min,
    Max,
    #[serde(alias = "avg", alias = "mean")]
    Average,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManipulationKind {
    Aggregate,
    FilterThenAggregate,
    Raw,
}

/// Closed interval; a missing bound is infinite.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl ValueRange {
    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Self {
        ValueRange { lower, upper }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| IntegrationError::Range { field: "manipulation.range".into(), message: m.into() };
        if self.lower.is_some_and(f64::is_nan) || self.upper.is_some_and(f64::is_nan) {
            return Err(err("bounds must be numbers"));
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo > hi {
                return Err(err("lower bound exceeds upper bound"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower.is_none_or(|lo| lo <= v) && self.upper.is_none_or(|hi| v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manipulation {
    pub kind: ManipulationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agg_fn: Option<AggFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<ValueRange>,
}

impl Manipulation {
    pub fn raw() -> Self {
        Manipulation { kind: ManipulationKind::Raw, agg_fn: None, range: None }
    }

    pub fn aggregate(f: AggFn) -> Self {
        Manipulation { kind: ManipulationKind::Aggregate, agg_fn: Some(f), range: None }
    }

    pub fn filter_then_aggregate(range: ValueRange, f: AggFn) -> Self {
        Manipulation { kind: ManipulationKind::FilterThenAggregate, agg_fn: Some(f), range: Some(range) }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.agg_fn) {
            (ManipulationKind::Raw, Some(_)) => {
                return Err(IntegrationError::spec("manipulation.agg_fn", "raw retention takes no aggregation"))
            }
            (ManipulationKind::Aggregate | ManipulationKind::FilterThenAggregate, None) => {
                return Err(IntegrationError::spec("manipulation.agg_fn", "aggregation function required"))
            }
            _ => {}
        }
        match (self.kind, &self.range) {
            (ManipulationKind::FilterThenAggregate, None) => {
                Err(IntegrationError::spec("manipulation.range", "filter_then_aggregate needs a range"))
            }
            (ManipulationKind::FilterThenAggregate, Some(r)) => r.validate(),
            (_, Some(_)) => Err(IntegrationError::spec("manipulation.range", "range only applies to filter_then_aggregate")),
            (_, None) => Ok(()),
        }
    }
}

fn default_true() -> bool {
    true
}

/// One user-authored integration of a device type into the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub device_type: String,
    /// Restricts the readings to one property of the device type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<String>,
    pub pattern: Pattern,
    /// Activity name for `event_attribute`, object type for `object_attribute`.
    pub target: String,
    pub attribute_name: String,
    pub correlation: CorrelationRule,
    pub manipulation: Manipulation,
    #[serde(default)]
    pub qualifier: String,
    #[serde(default = "default_true")]
    pub materialize_devices: bool,
}

/// The activity or object type a spec writes to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum Target {
    Activity(String),
    ObjectType(String),
}

impl Target {
    pub fn name(&self) -> &str {
        match self {
            Target::Activity(n) | Target::ObjectType(n) => n,
        }
    }
}

impl IntegrationSpec {
    pub fn target(&self) -> Target {
        match self.pattern {
            Pattern::EventAttribute => Target::Activity(self.target.clone()),
            Pattern::ObjectAttribute => Target::ObjectType(self.target.clone()),
        }
    }

    /// Checks the spec on its own.
    pub fn validate(&self) -> Result<()> {
        if self.device_type.trim().is_empty() {
            return Err(IntegrationError::spec("device_type", "must not be empty"));
        }
        if self.target.trim().is_empty() {
            return Err(IntegrationError::spec("target", "must not be empty"));
        }
        if self.attribute_name.trim().is_empty() {
            return Err(IntegrationError::spec("attribute_name", "must not be empty"));
        }
        if self.attribute_name.starts_with("ocel_") {
            return Err(IntegrationError::spec("attribute_name", "the ocel_ prefix is reserved"));
        }
        if self.materialize_devices && self.qualifier.trim().is_empty() {
            return Err(IntegrationError::spec("qualifier", "required when materializing devices"));
        }
        self.correlation.validate()?;
        self.manipulation.validate()
    }

    /// Checks the spec against a log: target exists, attribute is free.
    pub fn validate_against(&self, log: &OcelLog) -> Result<()> {
        self.validate()?;
        let existing = match self.pattern {
            Pattern::EventAttribute => {
                if !log.has_activity(&self.target) {
                    return Err(IntegrationError::NotFound { kind: "activity", name: self.target.clone() });
                }
                log.event_type(&self.target).and_then(|t| t.attribute(&self.attribute_name))
            }
            Pattern::ObjectAttribute => {
                if !log.has_object_type(&self.target) {
                    return Err(IntegrationError::NotFound { kind: "object type", name: self.target.clone() });
                }
                log.object_type(&self.target).and_then(|t| t.attribute(&self.attribute_name))
            }
        };
        if existing.is_some() {
            return Err(IntegrationError::AttributeCollision {
                target: self.target.clone(),
                attribute: self.attribute_name.clone(),
            });
        }
        if let Some(scope) = &self.correlation.object_type_scope {
            if !log.has_object_type(scope) {
                return Err(IntegrationError::NotFound { kind: "object type", name: scope.clone() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> IntegrationSpec {
        serde_json::from_str(
            r#"{"device_type":"weight","pattern":"object_attribute","target":"Truck",
                "attribute_name":"weight_kg","correlation":{"mode":"explicit_object_key"},
                "manipulation":{"kind":"aggregate","agg_fn":"avg"},"qualifier":"weighed-by"}"#,
        )
        .unwrap()
    }

    #[test]
    fn json_defaults() {
        let s = spec();
        assert!(s.materialize_devices);
        assert_eq!(s.manipulation.agg_fn, Some(AggFn::Average));
        assert_eq!(s.target(), Target::ObjectType("Truck".into()));
        s.validate().unwrap();
    }

    #[test]
    fn inverted_range_reports_field_path() {
        let mut s = spec();
        s.manipulation = Manipulation::filter_then_aggregate(ValueRange::new(Some(5.0), Some(1.0)), AggFn::Max);
        let err = s.validate().unwrap_err();
        assert!(matches!(err, IntegrationError::Range { .. }));
        assert_eq!(err.field(), Some("manipulation.range"));
    }

    #[test]
    fn manipulation_invariants() {
        assert!(Manipulation { kind: ManipulationKind::Raw, agg_fn: Some(AggFn::Min), range: None }.validate().is_err());
        assert!(Manipulation { kind: ManipulationKind::Aggregate, agg_fn: None, range: None }.validate().is_err());
        assert!(Manipulation::filter_then_aggregate(ValueRange::default(), AggFn::Min).validate().is_ok());
        assert!(Manipulation { range: Some(ValueRange::default()), ..Manipulation::raw() }.validate().is_err());
    }

    #[test]
    fn qualifier_required_for_devices() {
        let mut s = spec();
        s.qualifier.clear();
        assert_eq!(s.validate().unwrap_err().field(), Some("qualifier"));
        s.materialize_devices = false;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn negative_window_rejected() {
        let mut s = spec();
        s.correlation = CorrelationRule::window(-1, 5);
        assert!(s.validate().is_err());
    }
}
