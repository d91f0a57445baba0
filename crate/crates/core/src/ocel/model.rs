use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

/// Attribute value type of an OCEL type-table column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Text,
    Integer,
    Float,
    Boolean,
    Time,
}

impl ValueType {
    pub fn sql_type(self) -> &'static str {
        match self {
            ValueType::Text => "TEXT",
            ValueType::Integer => "INTEGER",
            ValueType::Float => "REAL",
            ValueType::Boolean => "BOOLEAN",
            ValueType::Time => "TIMESTAMP",
        }
    }

    /// Interprets a declared SQLite column type.
    pub fn from_declared(declared: &str) -> Self {
        let d = declared.to_ascii_uppercase();
        if d.contains("BOOL") {
            ValueType::Boolean
        } else if d.contains("TIME") || d.contains("DATE") {
            ValueType::Time
        } else if d.contains("INT") {
            ValueType::Integer
        } else if d.contains("REAL") || d.contains("FLOA") || d.contains("DOUB") || d.contains("NUM") {
            ValueType::Float
        } else {
            ValueType::Text
        }
    }

    pub fn accepts(self, value: &AttrValue) -> bool {
        matches!(
            (self, value),
            (_, AttrValue::Null)
                | (ValueType::Text, AttrValue::Text(_))
                | (ValueType::Integer, AttrValue::Integer(_))
                | (ValueType::Float, AttrValue::Float(_) | AttrValue::Integer(_))
                | (ValueType::Boolean, AttrValue::Boolean(_))
                | (ValueType::Time, AttrValue::Time(_))
        )
    }
}

/// A typed attribute cell. `Null` is distinct from `0` and from `""`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum AttrValue {
    Null,
    Text(String),
    Integer(i64),
    Float(f64),
    Boolean(bool),
    Time(Timestamp),
}

impl AttrValue {
    pub fn is_null(&self) -> bool {
        matches!(self, AttrValue::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Float(f) => Some(*f),
            AttrValue::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub(crate) fn to_sql(&self) -> rusqlite::types::Value {
        use rusqlite::types::Value as V;
        match self {
            AttrValue::Null => V::Null,
            AttrValue::Text(s) => V::Text(s.clone()),
            AttrValue::Integer(i) => V::Integer(*i),
            AttrValue::Float(f) => V::Real(*f),
            AttrValue::Boolean(b) => V::Integer(i64::from(*b)),
            AttrValue::Time(t) => V::Text(t.to_string()),
        }
    }

    pub(crate) fn from_sql(value: rusqlite::types::Value, ty: ValueType) -> Self {
        use rusqlite::types::Value as V;
        match (value, ty) {
            (V::Null, _) => AttrValue::Null,
            (V::Integer(i), ValueType::Boolean) if i == 0 || i == 1 => AttrValue::Boolean(i == 1),
            (V::Integer(i), _) => AttrValue::Integer(i),
            (V::Real(f), _) => AttrValue::Float(f),
            (V::Text(s), ValueType::Time) => match Timestamp::parse(&s) {
                Ok(t) => AttrValue::Time(t),
                Err(_) => AttrValue::Text(s),
            },
            (V::Text(s), _) => AttrValue::Text(s),
            (V::Blob(b), _) => AttrValue::Text(String::from_utf8_lossy(&b).into_owned()),
        }
    }
}

/// One declared attribute column of an event or object type table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDecl {
    pub name: String,
    pub value_type: ValueType,
    /// Declared SQL type as found in the store.
    pub declared: String,
}

impl AttributeDecl {
    pub fn new(name: impl Into<String>, value_type: ValueType) -> Self {
        AttributeDecl { name: name.into(), value_type, declared: value_type.sql_type().to_string() }
    }
}

/// An event type (activity) or object type with its per-type table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeSchema {
    pub name: String,
    /// Suffix of the per-type table (`event_<map>` / `object_<map>`).
    pub table_suffix: String,
    pub attributes: Vec<AttributeDecl>,
}

impl TypeSchema {
    pub fn attribute(&self, name: &str) -> Option<&AttributeDecl> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcelEvent {
    pub id: String,
    pub activity: String,
    pub time: Timestamp,
    pub attributes: BTreeMap<String, AttrValue>,
}

/// One row of an object type table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub time: Timestamp,
    pub changed_field: Option<String>,
    pub values: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcelObject {
    pub id: String,
    pub object_type: String,
    pub states: Vec<ObjectState>,
}

/// Flattened view of an object attribute change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeChange {
    pub name: String,
    pub value: AttrValue,
    pub time: Timestamp,
    pub changed_field: Option<String>,
}

impl OcelObject {
    /// Attribute history: rows with a changed-field marker contribute that
    /// field, unmarked rows contribute every non-null cell.
    pub fn attribute_history(&self) -> Vec<AttributeChange> {
        let mut out = Vec::new();
        for state in &self.states {
            match &state.changed_field {
                Some(field) => out.push(AttributeChange {
                    name: field.clone(),
                    value: state.values.get(field).cloned().unwrap_or(AttrValue::Null),
                    time: state.time,
                    changed_field: Some(field.clone()),
                }),
                None => out.extend(state.values.iter().filter(|(_, v)| !v.is_null()).map(|(k, v)| {
                    AttributeChange { name: k.clone(), value: v.clone(), time: state.time, changed_field: None }
                })),
            }
        }
        out
    }

    /// Values of one attribute in history order.
    pub fn attribute_values(&self, name: &str) -> Vec<(Timestamp, AttrValue)> {
        self.attribute_history().into_iter().filter(|c| c.name == name).map(|c| (c.time, c.value)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct E2ORelation {
    pub event_id: String,
    pub object_id: String,
    pub qualifier: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct O2ORelation {
    pub source_id: String,
    pub target_id: String,
    pub qualifier: String,
}

/// Raw SQLite cell of a table this crate does not interpret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum RawCell {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl From<rusqlite::types::Value> for RawCell {
    fn from(v: rusqlite::types::Value) -> Self {
        use rusqlite::types::Value as V;
        match v {
            V::Null => RawCell::Null,
            V::Integer(i) => RawCell::Integer(i),
            V::Real(f) => RawCell::Real(f),
            V::Text(s) => RawCell::Text(s),
            V::Blob(b) => RawCell::Blob(b),
        }
    }
}

impl From<&RawCell> for rusqlite::types::Value {
    fn from(c: &RawCell) -> Self {
        use rusqlite::types::Value as V;
        match c {
            RawCell::Null => V::Null,
            RawCell::Integer(i) => V::Integer(*i),
            RawCell::Real(f) => V::Real(*f),
            RawCell::Text(s) => V::Text(s.clone()),
            RawCell::Blob(b) => V::Blob(b.clone()),
        }
    }
}

/// A table preserved verbatim across load and write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpaqueTable {
    pub name: String,
    pub create_sql: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<RawCell>>,
}

/// Fully materialized OCEL 2.0 log. Immutable once loaded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OcelLog {
    pub event_types: Vec<TypeSchema>,
    pub object_types: Vec<TypeSchema>,
    pub events: Vec<OcelEvent>,
    pub objects: Vec<OcelObject>,
    pub e2o: Vec<E2ORelation>,
    pub o2o: Vec<O2ORelation>,
    #[serde(default)]
    pub extra_tables: Vec<OpaqueTable>,
}

impl OcelLog {
    pub fn event_type(&self, activity: &str) -> Option<&TypeSchema> {
        self.event_types.iter().find(|t| t.name == activity)
    }

    pub fn object_type(&self, name: &str) -> Option<&TypeSchema> {
        self.object_types.iter().find(|t| t.name == name)
    }

    /// An object type exists if it is declared or used by some object.
    pub fn has_object_type(&self, name: &str) -> bool {
        self.object_type(name).is_some() || self.objects.iter().any(|o| o.object_type == name)
    }

    pub fn has_activity(&self, name: &str) -> bool {
        self.event_type(name).is_some() || self.events.iter().any(|e| e.activity == name)
    }

    pub fn event(&self, id: &str) -> Option<&OcelEvent> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&OcelObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn event_index(&self) -> HashMap<&str, &OcelEvent> {
        self.events.iter().map(|e| (e.id.as_str(), e)).collect()
    }

    pub fn object_index(&self) -> HashMap<&str, &OcelObject> {
        self.objects.iter().map(|o| (o.id.as_str(), o)).collect()
    }

    /// Distinct related event ids per object id.
    pub fn events_by_object(&self) -> HashMap<&str, BTreeSet<&str>> {
        let mut map: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for r in &self.e2o {
            map.entry(r.object_id.as_str()).or_default().insert(r.event_id.as_str());
        }
        map
    }

    /// Distinct related object ids per event id.
    pub fn objects_by_event(&self) -> HashMap<&str, BTreeSet<&str>> {
        let mut map: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for r in &self.e2o {
            map.entry(r.event_id.as_str()).or_default().insert(r.object_id.as_str());
        }
        map
    }
}

/// Table suffix for a type name: ASCII alphanumerics and `_` kept, other
/// characters dropped, deduplicated against `taken` with a numeric suffix.
pub fn mapped_type_name<'a>(name: &str, taken: impl IntoIterator<Item = &'a str>) -> String {
    let taken: BTreeSet<&str> = taken.into_iter().collect();
    let mut base: String = name.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
    if base.is_empty() {
        base = "type".to_string();
    }
    if !taken.contains(base.as_str()) {
        return base;
    }
    (2..).map(|i| format!("{base}{i}")).find(|c| !taken.contains(c.as_str())).expect("unbounded")
}
