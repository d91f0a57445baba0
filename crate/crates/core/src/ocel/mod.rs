//! OCEL 2.0 relational logs: in-memory model, SQLite store, validation,
//! statistics, directly-follows discovery and additive migration.

mod dfg;
pub mod lease;
mod migrate;
mod model;
mod stats;
mod store;
mod validate;

pub use dfg::{directly_follows, DfgEdge};
pub use migrate::{
    apply_additions, apply_additions_with, AdditionSet, ApplyOptions, ApplyReceipt,
    ColumnAddition, EventAttributeWrite, ObjectAttributeRow,
};
pub use model::{
    mapped_type_name, AttrValue, AttributeChange, AttributeDecl, E2ORelation, O2ORelation,
    ObjectState, OcelEvent, OcelLog, OcelObject, OpaqueTable, RawCell, TypeSchema, ValueType,
};
pub use stats::{log_statistics, OcelStats};
pub use store::{load_ocel, table_rows, write_ocel, MANDATORY_TABLES};
pub use validate::{validate_ocel, Violation, ViolationKind};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum OcelError {
    #[error("missing mandatory table {0:?}")]
    Schema(String),
    #[error("integrity violation: {}", .0.join("; "))]
    Integrity(Vec<String>),
    #[error("migration conflict on {table}.{column}: {reason}")]
    MigrationConflict { table: String, column: String, reason: String },
    #[error("invalid addition set: {0}")]
    InvalidAdditions(String),
    #[error("{kind} {name:?} not found")]
    NotFound { kind: &'static str, name: String },
    #[error("writer lease held for {0}")]
    LeaseHeld(PathBuf),
    #[error("store {0} already exists")]
    AlreadyExists(PathBuf),
    #[error("injected failure after {0} statements")]
    InjectedFault(usize),
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = OcelError> = std::result::Result<T, E>;
