//! Non-destructive, additive migration of an OCEL store.
//!
//! An [`AdditionSet`] can only introduce: object types, attribute columns,
//! cells of columns it introduces itself, object history rows, objects and
//! relation rows. Pre-existing rows are never updated or deleted.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rusqlite::types::Value as SqlValue;
use rusqlite::{Connection, TransactionBehavior};
use serde::{Deserialize, Serialize};

use super::lease;
use super::model::*;
use super::store::{create_type_table, insert_object_state, insert_row, load_from_conn, quote_ident};
use super::{OcelError, Result};
use crate::time::Timestamp;

/// A new attribute column on the table of `owner` (activity or object type).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnAddition {
    pub owner: String,
    pub name: String,
    pub value_type: ValueType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAttributeWrite {
    pub event_id: String,
    pub name: String,
    pub value: AttrValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAttributeRow {
    pub object_id: String,
    pub name: String,
    pub value: AttrValue,
    pub time: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdditionSet {
    pub new_object_types: Vec<String>,
    pub new_event_attribute_columns: Vec<ColumnAddition>,
    pub new_object_attribute_columns: Vec<ColumnAddition>,
    pub event_attribute_writes: Vec<EventAttributeWrite>,
    pub object_attribute_rows: Vec<ObjectAttributeRow>,
    pub new_objects: Vec<OcelObject>,
    pub new_e2o: Vec<E2ORelation>,
    pub new_o2o: Vec<O2ORelation>,
}

impl AdditionSet {
    pub fn is_empty(&self) -> bool {
        self.receipt() == ApplyReceipt::default()
    }

    /// Counts this set produces when applied.
    pub fn receipt(&self) -> ApplyReceipt {
        ApplyReceipt {
            object_types_added: self.new_object_types.len(),
            columns_added: self.new_event_attribute_columns.len() + self.new_object_attribute_columns.len(),
            event_attribute_writes: self.event_attribute_writes.len(),
            object_attribute_rows: self.object_attribute_rows.len(),
            objects_added: self.new_objects.len(),
            e2o_added: self.new_e2o.len(),
            o2o_added: self.new_o2o.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyReceipt {
    pub object_types_added: usize,
    pub columns_added: usize,
    pub event_attribute_writes: usize,
    pub object_attribute_rows: usize,
    pub objects_added: usize,
    pub e2o_added: usize,
    pub o2o_added: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ApplyOptions {
    /// Fail with [`OcelError::LeaseHeld`] instead of queueing.
    pub no_wait: bool,
    /// Fault injection: abort after this many write statements.
    #[doc(hidden)]
    pub fail_after: Option<usize>,
}

/// Applies `additions` to the store at `path` in a single transaction.
pub fn apply_additions(path: impl AsRef<Path>, additions: &AdditionSet) -> Result<ApplyReceipt> {
    apply_additions_with(path, additions, &ApplyOptions::default())
}

pub fn apply_additions_with(
    path: impl AsRef<Path>,
    additions: &AdditionSet,
    options: &ApplyOptions,
) -> Result<ApplyReceipt> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(OcelError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )));
    }
    let _guard = if options.no_wait {
        lease::try_write(path).ok_or_else(|| OcelError::LeaseHeld(path.to_path_buf()))?
    } else {
        lease::write(path)
    };
    if additions.is_empty() {
        // Nothing to write; the file is left untouched.
        let conn = super::store::open_read(path)?;
        load_from_conn(&conn)?;
        return Ok(ApplyReceipt::default());
    }
    let mut conn = Connection::open(path)?;
    conn.busy_timeout(std::time::Duration::from_secs(10))?;
    let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
    let log = load_from_conn(&tx)?;
    let plan = check(&log, additions)?;
    let mut writer = Writer { conn: &tx, written: 0, fail_after: options.fail_after };
    writer.run(additions, &plan)?;
    tx.commit()?;
    Ok(additions.receipt())
}

/// Resolved table layout after the additions.
struct Resolved {
    event_types: HashMap<String, TypeSchema>,
    object_types: HashMap<String, TypeSchema>,
    new_object_types: Vec<TypeSchema>,
    event_activity: HashMap<String, String>,
    object_type_of: HashMap<String, String>,
}

fn conflict(table: &str, column: &str, reason: impl Into<String>) -> OcelError {
    OcelError::MigrationConflict { table: table.to_string(), column: column.to_string(), reason: reason.into() }
}

fn check(log: &OcelLog, add: &AdditionSet) -> Result<Resolved> {
    let mut event_types: HashMap<String, TypeSchema> =
        log.event_types.iter().map(|t| (t.name.clone(), t.clone())).collect();
    let mut object_types: HashMap<String, TypeSchema> =
        log.object_types.iter().map(|t| (t.name.clone(), t.clone())).collect();

    let mut new_object_types = Vec::new();
    for name in &add.new_object_types {
        if object_types.contains_key(name) {
            return Err(conflict("object_map_type", name, "object type already exists"));
        }
        let taken: Vec<String> = object_types.values().map(|t| t.table_suffix.clone()).collect();
        let schema = TypeSchema {
            name: name.clone(),
            table_suffix: mapped_type_name(name, taken.iter().map(String::as_str)),
            attributes: Vec::new(),
        };
        object_types.insert(name.clone(), schema.clone());
        new_object_types.push(schema);
    }

    let mut new_event_cols: HashSet<(String, String)> = HashSet::new();
    for col in &add.new_event_attribute_columns {
        let schema = event_types
            .get_mut(&col.owner)
            .ok_or_else(|| OcelError::NotFound { kind: "activity", name: col.owner.clone() })?;
        add_column(schema, "event", col)?;
        new_event_cols.insert((col.owner.clone(), col.name.clone()));
    }
    for col in &add.new_object_attribute_columns {
        let schema = object_types
            .get_mut(&col.owner)
            .ok_or_else(|| OcelError::NotFound { kind: "object type", name: col.owner.clone() })?;
        add_column(schema, "object", col)?;
    }

    let event_activity: HashMap<String, String> =
        log.events.iter().map(|e| (e.id.clone(), e.activity.clone())).collect();
    let mut object_type_of: HashMap<String, String> =
        log.objects.iter().map(|o| (o.id.clone(), o.object_type.clone())).collect();
    for o in &add.new_objects {
        if o.id.is_empty() || object_type_of.contains_key(&o.id) {
            return Err(OcelError::InvalidAdditions(format!("object id {:?} is empty or already present", o.id)));
        }
        let schema = object_types
            .get(&o.object_type)
            .ok_or_else(|| OcelError::NotFound { kind: "object type", name: o.object_type.clone() })?;
        for state in &o.states {
            for (name, value) in &state.values {
                check_cell(schema, "object", name, value)?;
            }
        }
        object_type_of.insert(o.id.clone(), o.object_type.clone());
    }

    let mut dangling = Vec::new();
    let mut written = HashSet::new();
    for w in &add.event_attribute_writes {
        let Some(activity) = event_activity.get(&w.event_id) else {
            dangling.push(format!("event attribute write references absent event {:?}", w.event_id));
            continue;
        };
        if !new_event_cols.contains(&(activity.clone(), w.name.clone())) {
            return Err(OcelError::InvalidAdditions(format!(
                "write to {}.{} targets a column this set does not introduce",
                w.event_id, w.name
            )));
        }
        if !written.insert((w.event_id.as_str(), w.name.as_str())) {
            return Err(OcelError::InvalidAdditions(format!("duplicate write to {}.{}", w.event_id, w.name)));
        }
        check_cell(&event_types[activity], "event", &w.name, &w.value)?;
    }
    for row in &add.object_attribute_rows {
        let Some(ty) = object_type_of.get(&row.object_id) else {
            dangling.push(format!("object attribute row references absent object {:?}", row.object_id));
            continue;
        };
        check_cell(&object_types[ty], "object", &row.name, &row.value)?;
    }
    for r in &add.new_e2o {
        if !event_activity.contains_key(&r.event_id) {
            dangling.push(format!("event_object addition references absent event {:?}", r.event_id));
        }
        if !object_type_of.contains_key(&r.object_id) {
            dangling.push(format!("event_object addition references absent object {:?}", r.object_id));
        }
    }
    for r in &add.new_o2o {
        for id in [&r.source_id, &r.target_id] {
            if !object_type_of.contains_key(id) {
                dangling.push(format!("object_object addition references absent object {id:?}"));
            }
        }
    }
    if !dangling.is_empty() {
        return Err(OcelError::Integrity(dangling));
    }
    Ok(Resolved { event_types, object_types, new_object_types, event_activity, object_type_of })
}

fn add_column(schema: &mut TypeSchema, kind: &str, col: &ColumnAddition) -> Result<()> {
    let table = format!("{kind}_{}", schema.table_suffix);
    if col.name.is_empty() || col.name.starts_with("ocel_") {
        return Err(OcelError::InvalidAdditions(format!("invalid column name {:?}", col.name)));
    }
    if let Some(existing) = schema.attribute(&col.name) {
        let reason = if existing.value_type == col.value_type {
            "column already exists".to_string()
        } else {
            format!("column exists as {:?}, requested {:?}", existing.value_type, col.value_type)
        };
        return Err(conflict(&table, &col.name, reason));
    }
    schema.attributes.push(AttributeDecl::new(col.name.clone(), col.value_type));
    Ok(())
}

fn check_cell(schema: &TypeSchema, kind: &str, name: &str, value: &AttrValue) -> Result<()> {
    let decl = schema.attribute(name).ok_or_else(|| {
        OcelError::InvalidAdditions(format!("{kind} type {:?} has no attribute {name:?}", schema.name))
    })?;
    if !decl.value_type.accepts(value) {
        return Err(OcelError::InvalidAdditions(format!(
            "value {value:?} does not fit column {name:?} of type {:?}",
            decl.value_type
        )));
    }
    Ok(())
}

struct Writer<'c> {
    conn: &'c Connection,
    written: usize,
    fail_after: Option<usize>,
}

impl Writer<'_> {
    fn tick(&mut self) -> Result<()> {
        if self.fail_after == Some(self.written) {
            return Err(OcelError::InjectedFault(self.written));
        }
        self.written += 1;
        Ok(())
    }

    fn run(&mut self, add: &AdditionSet, r: &Resolved) -> Result<()> {
        let conn = self.conn;
        for t in &r.new_object_types {
            self.tick()?;
            insert_row(conn, "object_map_type", &["ocel_type", "ocel_type_map"], vec![
                SqlValue::Text(t.name.clone()),
                SqlValue::Text(t.table_suffix.clone()),
            ])?;
            create_type_table(conn, "object", t)?;
        }
        for (kind, cols, types) in [
            ("event", &add.new_event_attribute_columns, &r.event_types),
            ("object", &add.new_object_attribute_columns, &r.object_types),
        ] {
            for col in cols {
                self.tick()?;
                let table = format!("{kind}_{}", types[&col.owner].table_suffix);
                conn.execute_batch(&format!(
                    "ALTER TABLE {} ADD COLUMN {} {}",
                    quote_ident(&table),
                    quote_ident(&col.name),
                    col.value_type.sql_type()
                ))?;
            }
        }
        for w in &add.event_attribute_writes {
            if w.value.is_null() {
                continue;
            }
            self.tick()?;
            let schema = &r.event_types[&r.event_activity[&w.event_id]];
            let sql = format!(
                "UPDATE {} SET {} = ?1 WHERE ocel_id = ?2 AND {} IS NULL",
                quote_ident(&format!("event_{}", schema.table_suffix)),
                quote_ident(&w.name),
                quote_ident(&w.name)
            );
            conn.prepare_cached(&sql)?.execute(rusqlite::params![w.value.to_sql(), w.event_id])?;
        }
        for o in &add.new_objects {
            self.tick()?;
            insert_row(conn, "object", &["ocel_id", "ocel_type"], vec![
                SqlValue::Text(o.id.clone()),
                SqlValue::Text(o.object_type.clone()),
            ])?;
            for state in &o.states {
                self.tick()?;
                insert_object_state(conn, &r.object_types[&o.object_type], &o.id, state)?;
            }
        }
        for row in &add.object_attribute_rows {
            self.tick()?;
            let schema = &r.object_types[&r.object_type_of[&row.object_id]];
            let state = ObjectState {
                time: row.time,
                changed_field: Some(row.name.clone()),
                values: BTreeMap::from([(row.name.clone(), row.value.clone())]),
            };
            insert_object_state(conn, schema, &row.object_id, &state)?;
        }
        for e in &add.new_e2o {
            self.tick()?;
            insert_row(conn, "event_object", &["ocel_event_id", "ocel_object_id", "ocel_qualifier"], vec![
                SqlValue::Text(e.event_id.clone()),
                SqlValue::Text(e.object_id.clone()),
                SqlValue::Text(e.qualifier.clone()),
            ])?;
        }
        for o in &add.new_o2o {
            self.tick()?;
            insert_row(conn, "object_object", &["ocel_source_id", "ocel_target_id", "ocel_qualifier"], vec![
                SqlValue::Text(o.source_id.clone()),
                SqlValue::Text(o.target_id.clone()),
                SqlValue::Text(o.qualifier.clone()),
            ])?;
        }
        Ok(())
    }
}
