//! SQLite persistence in the OCEL 2.0 relational layout.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rusqlite::types::Value as SqlValue;
use rusqlite::{params_from_iter, Connection, OpenFlags};

use super::lease;
use super::model::*;
use super::{OcelError, Result};
use crate::time::Timestamp;

/// Tables every OCEL 2.0 relational store must contain.
pub const MANDATORY_TABLES: [&str; 6] =
    ["event", "object", "event_object", "object_object", "event_map_type", "object_map_type"];

pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

pub(crate) fn open_read(path: &Path) -> Result<Connection> {
    if !path.is_file() {
        return Err(OcelError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )));
    }
    Ok(Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)?)
}

/// Loads a store into memory. Takes a shared read lease on the file.
pub fn load_ocel(path: impl AsRef<Path>) -> Result<OcelLog> {
    let path = path.as_ref();
    let conn = open_read(path)?;
    let _guard = lease::read(path);
    load_from_conn(&conn)
}

pub(crate) fn list_tables(conn: &Connection) -> Result<Vec<(String, String)>> {
    let mut stmt = conn.prepare(
        "SELECT name, COALESCE(sql, '') FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid",
    )?;
    let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}

pub(crate) fn table_columns(conn: &Connection, table: &str) -> Result<Vec<(String, String)>> {
    let mut stmt = conn.prepare(&format!("PRAGMA table_info({})", quote_ident(table)))?;
    let rows = stmt.query_map([], |r| Ok((r.get::<_, String>(1)?, r.get::<_, String>(2)?)))?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}

/// Every row of `table` as raw SQLite values, in storage order.
pub fn table_rows(conn: &Connection, table: &str) -> Result<Vec<Vec<SqlValue>>> {
    let mut stmt = conn.prepare(&format!("SELECT * FROM {}", quote_ident(table)))?;
    let n = stmt.column_count();
    let rows = stmt.query_map([], |r| (0..n).map(|i| r.get::<_, SqlValue>(i)).collect())?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}

fn text(v: &SqlValue) -> String {
    match v {
        SqlValue::Null => String::new(),
        SqlValue::Integer(i) => i.to_string(),
        SqlValue::Real(f) => f.to_string(),
        SqlValue::Text(s) => s.clone(),
        SqlValue::Blob(b) => String::from_utf8_lossy(b).into_owned(),
    }
}

fn read_type_map(conn: &Connection, table: &str) -> Result<Vec<(String, String)>> {
    Ok(table_rows(conn, table)?.iter().map(|r| (text(&r[0]), text(&r[1]))).collect())
}

struct TypeTable {
    schema: TypeSchema,
    /// Column layout of the table, in declared order.
    columns: Vec<String>,
}

fn read_type_table(
    conn: &Connection,
    kind: &str,
    name: &str,
    suffix: &str,
    tables: &HashSet<String>,
) -> Result<TypeTable> {
    let table = format!("{kind}_{suffix}");
    if !tables.contains(&table) {
        return Err(OcelError::Schema(table));
    }
    let columns = table_columns(conn, &table)?;
    let attributes = columns
        .iter()
        .filter(|(c, _)| !c.starts_with("ocel_"))
        .map(|(c, d)| AttributeDecl { name: c.clone(), value_type: ValueType::from_declared(d), declared: d.clone() })
        .collect();
    Ok(TypeTable {
        schema: TypeSchema { name: name.to_string(), table_suffix: suffix.to_string(), attributes },
        columns: columns.into_iter().map(|(c, _)| c).collect(),
    })
}

fn parse_time(v: &SqlValue) -> Option<Timestamp> {
    match v {
        SqlValue::Text(s) => Timestamp::parse(s).ok(),
        SqlValue::Integer(i) => Some(Timestamp::from_millis(*i)),
        _ => None,
    }
}

pub(crate) fn load_from_conn(conn: &Connection) -> Result<OcelLog> {
    let all_tables = list_tables(conn)?;
    let table_set: HashSet<String> = all_tables.iter().map(|(n, _)| n.clone()).collect();
    for t in MANDATORY_TABLES {
        if !table_set.contains(t) {
            return Err(OcelError::Schema(t.to_string()));
        }
    }

    let mut integrity = Vec::new();
    let mut typed_tables: HashSet<String> = HashSet::new();

    let mut event_types = Vec::new();
    let mut event_rows: HashMap<String, (Timestamp, BTreeMap<String, AttrValue>)> = HashMap::new();
    for (name, suffix) in read_type_map(conn, "event_map_type")? {
        let tt = read_type_table(conn, "event", &name, &suffix, &table_set)?;
        let table = format!("event_{suffix}");
        typed_tables.insert(table.clone());
        let id_col = tt.columns.iter().position(|c| c == "ocel_id");
        let time_col = tt.columns.iter().position(|c| c == "ocel_time");
        let (Some(id_col), Some(time_col)) = (id_col, time_col) else {
            return Err(OcelError::Schema(table));
        };
        for (row_no, row) in table_rows(conn, &table)?.into_iter().enumerate() {
            let id = text(&row[id_col]);
            let Some(time) = parse_time(&row[time_col]) else {
                integrity.push(format!("{table} row {row_no}: unparseable ocel_time for {id:?}"));
                continue;
            };
            let mut attrs = BTreeMap::new();
            for (i, value) in row.into_iter().enumerate() {
                if let Some(decl) = tt.schema.attribute(&tt.columns[i]) {
                    attrs.insert(decl.name.clone(), AttrValue::from_sql(value, decl.value_type));
                }
            }
            event_rows.insert(id, (time, attrs));
        }
        event_types.push(tt.schema);
    }

    let mut object_types = Vec::new();
    let mut object_states: HashMap<String, Vec<ObjectState>> = HashMap::new();
    for (name, suffix) in read_type_map(conn, "object_map_type")? {
        let tt = read_type_table(conn, "object", &name, &suffix, &table_set)?;
        let table = format!("object_{suffix}");
        typed_tables.insert(table.clone());
        let pos = |c: &str| tt.columns.iter().position(|x| x == c);
        let (Some(id_col), Some(time_col)) = (pos("ocel_id"), pos("ocel_time")) else {
            return Err(OcelError::Schema(table));
        };
        let changed_col = pos("ocel_changed_field");
        for (row_no, row) in table_rows(conn, &table)?.into_iter().enumerate() {
            let id = text(&row[id_col]);
            let Some(time) = parse_time(&row[time_col]) else {
                integrity.push(format!("{table} row {row_no}: unparseable ocel_time for {id:?}"));
                continue;
            };
            let changed_field = changed_col.and_then(|c| match &row[c] {
                SqlValue::Null => None,
                v => Some(text(v)),
            });
            let mut values = BTreeMap::new();
            for (i, value) in row.into_iter().enumerate() {
                if let Some(decl) = tt.schema.attribute(&tt.columns[i]) {
                    values.insert(decl.name.clone(), AttrValue::from_sql(value, decl.value_type));
                }
            }
            object_states.entry(id).or_default().push(ObjectState { time, changed_field, values });
        }
        object_types.push(tt.schema);
    }

    let mut events = Vec::new();
    for (row_no, row) in table_rows(conn, "event")?.into_iter().enumerate() {
        let (id, activity) = (text(&row[0]), text(&row[1]));
        match event_rows.remove(&id) {
            Some((time, attributes)) => events.push(OcelEvent { id, activity, time, attributes }),
            None => integrity.push(format!("event row {row_no}: {id:?} has no row in its type table")),
        }
    }
    let mut objects = Vec::new();
    for row in table_rows(conn, "object")? {
        let (id, object_type) = (text(&row[0]), text(&row[1]));
        let states = object_states.remove(&id).unwrap_or_default();
        objects.push(OcelObject { id, object_type, states });
    }

    let event_ids: HashSet<&str> = events.iter().map(|e| e.id.as_str()).collect();
    let object_ids: HashSet<&str> = objects.iter().map(|o| o.id.as_str()).collect();
    let mut e2o = Vec::new();
    for (row_no, row) in table_rows(conn, "event_object")?.into_iter().enumerate() {
        let rel = E2ORelation { event_id: text(&row[0]), object_id: text(&row[1]), qualifier: text(&row[2]) };
        if !event_ids.contains(rel.event_id.as_str()) {
            integrity.push(format!("event_object row {row_no}: ocel_event_id {:?} not found", rel.event_id));
        }
        if !object_ids.contains(rel.object_id.as_str()) {
            integrity.push(format!("event_object row {row_no}: ocel_object_id {:?} not found", rel.object_id));
        }
        e2o.push(rel);
    }
    let mut o2o = Vec::new();
    for (row_no, row) in table_rows(conn, "object_object")?.into_iter().enumerate() {
        let rel = O2ORelation { source_id: text(&row[0]), target_id: text(&row[1]), qualifier: text(&row[2]) };
        for id in [&rel.source_id, &rel.target_id] {
            if !object_ids.contains(id.as_str()) {
                integrity.push(format!("object_object row {row_no}: object {id:?} not found"));
            }
        }
        o2o.push(rel);
    }
    if !integrity.is_empty() {
        return Err(OcelError::Integrity(integrity));
    }

    let mut extra_tables = Vec::new();
    for (name, sql) in &all_tables {
        if MANDATORY_TABLES.contains(&name.as_str()) || typed_tables.contains(name) {
            continue;
        }
        let columns = table_columns(conn, name)?.into_iter().map(|(c, _)| c).collect();
        let rows = table_rows(conn, name)?.into_iter().map(|r| r.into_iter().map(RawCell::from).collect()).collect();
        extra_tables.push(OpaqueTable { name: name.clone(), create_sql: sql.clone(), columns, rows });
    }

    Ok(OcelLog { event_types, object_types, events, objects, e2o, o2o, extra_tables })
}

pub(crate) fn create_type_table(conn: &Connection, kind: &str, schema: &TypeSchema) -> Result<()> {
    let mut cols = vec!["\"ocel_id\" TEXT".to_string(), "\"ocel_time\" TIMESTAMP".to_string()];
    if kind == "object" {
        cols.push("\"ocel_changed_field\" TEXT".to_string());
    }
    cols.extend(schema.attributes.iter().map(|a| format!("{} {}", quote_ident(&a.name), a.declared)));
    conn.execute_batch(&format!(
        "CREATE TABLE {} ({})",
        quote_ident(&format!("{kind}_{}", schema.table_suffix)),
        cols.join(", ")
    ))?;
    Ok(())
}

pub(crate) fn insert_row(conn: &Connection, table: &str, columns: &[&str], values: Vec<SqlValue>) -> Result<()> {
    let cols: Vec<String> = columns.iter().map(|c| quote_ident(c)).collect();
    let marks = vec!["?"; columns.len()].join(", ");
    conn.prepare_cached(&format!("INSERT INTO {} ({}) VALUES ({marks})", quote_ident(table), cols.join(", ")))?
        .execute(params_from_iter(values))?;
    Ok(())
}

pub(crate) fn insert_object_state(
    conn: &Connection,
    schema: &TypeSchema,
    object_id: &str,
    state: &ObjectState,
) -> Result<()> {
    let mut columns = vec!["ocel_id", "ocel_time", "ocel_changed_field"];
    let mut values = vec![
        SqlValue::Text(object_id.to_string()),
        SqlValue::Text(state.time.to_string()),
        state.changed_field.clone().map_or(SqlValue::Null, SqlValue::Text),
    ];
    for (name, value) in &state.values {
        columns.push(name);
        values.push(value.to_sql());
    }
    insert_row(conn, &format!("object_{}", schema.table_suffix), &columns, values)
}

/// Writes `log` to a new store at `path` (which must not exist). Time
/// cells are written in canonical form.
pub fn write_ocel(log: &OcelLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.exists() {
        return Err(OcelError::AlreadyExists(path.to_path_buf()));
    }
    let mut conn = Connection::open(path)?;
    let tx = conn.transaction()?;
    tx.execute_batch(
        "CREATE TABLE \"event\" (\"ocel_id\" TEXT, \"ocel_type\" TEXT);
         CREATE TABLE \"object\" (\"ocel_id\" TEXT, \"ocel_type\" TEXT);
         CREATE TABLE \"event_object\" (\"ocel_event_id\" TEXT, \"ocel_object_id\" TEXT, \"ocel_qualifier\" TEXT);
         CREATE TABLE \"object_object\" (\"ocel_source_id\" TEXT, \"ocel_target_id\" TEXT, \"ocel_qualifier\" TEXT);
         CREATE TABLE \"event_map_type\" (\"ocel_type\" TEXT, \"ocel_type_map\" TEXT);
         CREATE TABLE \"object_map_type\" (\"ocel_type\" TEXT, \"ocel_type_map\" TEXT);",
    )?;
    for t in &log.event_types {
        insert_row(&tx, "event_map_type", &["ocel_type", "ocel_type_map"], vec![
            SqlValue::Text(t.name.clone()),
            SqlValue::Text(t.table_suffix.clone()),
        ])?;
        create_type_table(&tx, "event", t)?;
    }
    for t in &log.object_types {
        insert_row(&tx, "object_map_type", &["ocel_type", "ocel_type_map"], vec![
            SqlValue::Text(t.name.clone()),
            SqlValue::Text(t.table_suffix.clone()),
        ])?;
        create_type_table(&tx, "object", t)?;
    }
    for e in &log.events {
        insert_row(&tx, "event", &["ocel_id", "ocel_type"], vec![
            SqlValue::Text(e.id.clone()),
            SqlValue::Text(e.activity.clone()),
        ])?;
        let schema = log
            .event_type(&e.activity)
            .ok_or_else(|| OcelError::NotFound { kind: "event type", name: e.activity.clone() })?;
        let mut columns = vec!["ocel_id", "ocel_time"];
        let mut values = vec![SqlValue::Text(e.id.clone()), SqlValue::Text(e.time.to_string())];
        for (name, value) in &e.attributes {
            columns.push(name);
            values.push(value.to_sql());
        }
        insert_row(&tx, &format!("event_{}", schema.table_suffix), &columns, values)?;
    }
    for o in &log.objects {
        insert_row(&tx, "object", &["ocel_id", "ocel_type"], vec![
            SqlValue::Text(o.id.clone()),
            SqlValue::Text(o.object_type.clone()),
        ])?;
        if o.states.is_empty() {
            continue;
        }
        let schema = log
            .object_type(&o.object_type)
            .ok_or_else(|| OcelError::NotFound { kind: "object type", name: o.object_type.clone() })?;
        for state in &o.states {
            insert_object_state(&tx, schema, &o.id, state)?;
        }
    }
    for r in &log.e2o {
        insert_row(&tx, "event_object", &["ocel_event_id", "ocel_object_id", "ocel_qualifier"], vec![
            SqlValue::Text(r.event_id.clone()),
            SqlValue::Text(r.object_id.clone()),
            SqlValue::Text(r.qualifier.clone()),
        ])?;
    }
    for r in &log.o2o {
        insert_row(&tx, "object_object", &["ocel_source_id", "ocel_target_id", "ocel_qualifier"], vec![
            SqlValue::Text(r.source_id.clone()),
            SqlValue::Text(r.target_id.clone()),
            SqlValue::Text(r.qualifier.clone()),
        ])?;
    }
    for t in &log.extra_tables {
        tx.execute_batch(&t.create_sql)?;
        let cols: Vec<&str> = t.columns.iter().map(String::as_str).collect();
        for row in &t.rows {
            insert_row(&tx, &t.name, &cols, row.iter().map(SqlValue::from).collect())?;
        }
    }
    tx.commit()?;
    Ok(())
}
