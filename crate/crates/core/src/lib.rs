//! Integrate process-relevant IoT data into OCEL 2.0 object-centric event logs.
//!
//! The crate is organised around the stages of the enrichment pipeline:
//!
//! - [`iot`] normalizes raw tabular sensor/actuator data into a small
//!   Device / Property / Result / Time / Location schema and summarizes it.
//! - [`ocel`] loads, validates, explores and additively migrates OCEL 2.0
//!   SQLite stores.
//! - [`integrate`] turns an [`integrate::IntegrationSpec`] into an
//!   [`ocel::AdditionSet`] by correlating readings with events or objects.
//! - [`workspace`] stages artifacts on disk (`uploads/`, `adjusted/`,
//!   `processed/`), stores columnar intermediates and keeps the job ledger.
//! - [`scenario`] generates a deterministic port cargo-pickup scenario with
//!   a ground-truth ledger.
//! - [`pipeline`] wires the stages together for the CLI and HTTP frontends.

pub mod error;
pub mod integrate;
pub mod iot;
pub mod ocel;
pub mod pipeline;
pub mod scenario;
pub mod time;
pub mod workspace;

mod digest;

pub use error::{Error, ErrorClass};
pub use integrate::{
    aggregate, correlate, execute, filter_range, plan, AggFn, CorrelationMode, CorrelationRule, EnrichmentPlan,
    EnrichmentReport, IntegrationError, IntegrationSpec, Manipulation, ManipulationKind, MatchSet, Pattern, Target,
    ValueRange,
};
pub use iot::{
    device_summary, infer_mapping, normalize, ColumnMapping, DeviceDescriptor, DeviceKind, DeviceSummary,
    NormalizedReading, PropertyDescriptor, ReadingValue, Reject, RejectReason, Role, Table, ValueKind,
};
pub use ocel::{
    apply_additions, directly_follows, load_ocel, log_statistics, validate_ocel, write_ocel, AdditionSet,
    ApplyReceipt, AttrValue, DfgEdge, E2ORelation, O2ORelation, OcelEvent, OcelLog, OcelObject, OcelStats, ValueType,
    Violation,
};
pub use time::Timestamp;
pub use workspace::Workspace;
