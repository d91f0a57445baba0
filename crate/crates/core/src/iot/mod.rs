//! IoT data processing: map raw tabular readings onto the Device / Property
//! / Result / Time / Location schema, reject what cannot be represented and
//! summarize the accepted readings per device type.
//!
//! Schema roles and the SOSA/SSN elements they stand for:
//!
//! | field                | element                                      |
//! |----------------------|----------------------------------------------|
//! | `device`             | `sosa:Sensor`, `sosa:Actuator`               |
//! | `property`           | `sosa:ObservableProperty`, `sosa:ActuatableProperty`, `ssn:Property` |
//! | `result`             | `sosa:Result`                                |
//! | `result_time`        | `sosa:resultTime`                            |
//! | `location`           | `sosa:Platform`, `ssn:Deployment`            |
//!
//! Features of interest are not represented: they are the business objects
//! already present in the event log. `object_ref` / `event_ref` are
//! correlation hints only.

mod columnar;
mod mapping;
mod normalize;
mod summary;
mod table;

pub use columnar::{readings_from_columnar, readings_to_columnar, NORMALIZED_COLUMNS};
pub use mapping::{infer_mapping, ColumnMapping, MappingSuggestion, Role, SYNONYMS};
pub use normalize::{normalize, readings_to_table, Normalized, Reject, RejectReason};
pub use summary::{device_summary, DeviceSummary, DeviceTypeSummary, NumericRange};
pub use table::Table;

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum IotError {
    #[error("mapping error: {0}")]
    Mapping(String),
    #[error("malformed table: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = IotError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    #[default]
    Sensor,
    Actuator,
}

impl DeviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Sensor => "sensor",
            DeviceKind::Actuator => "actuator",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sensor" | "sosa:sensor" => Some(DeviceKind::Sensor),
            "actuator" | "sosa:actuator" => Some(DeviceKind::Actuator),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub device_id: String,
    pub device_type: String,
    pub device_kind: DeviceKind,
    pub platform: Option<String>,
    pub deployment: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Numeric,
    Textual,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PropertyDescriptor {
    pub name: String,
    pub unit: Option<String>,
    pub value_type: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReadingValue {
    Numeric(f64),
    Boolean(bool),
    Text(String),
}

impl ReadingValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ReadingValue::Numeric(v) => Some(*v),
            _ => None,
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            ReadingValue::Numeric(_) => ValueKind::Numeric,
            ReadingValue::Boolean(_) => ValueKind::Boolean,
            ReadingValue::Text(_) => ValueKind::Textual,
        }
    }

    /// Text rendering that parses back to the same value.
    pub fn render(&self) -> String {
        match self {
            ReadingValue::Numeric(v) => v.to_string(),
            ReadingValue::Boolean(b) => b.to_string(),
            ReadingValue::Text(s) => s.clone(),
        }
    }
}

/// One accepted IoT record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedReading {
    pub device: DeviceDescriptor,
    pub property: PropertyDescriptor,
    pub result: ReadingValue,
    pub result_time: Timestamp,
    pub location: Option<String>,
    /// Zero-based data row in the source table.
    pub source_row: usize,
    pub object_ref: Option<String>,
    pub event_ref: Option<String>,
}
