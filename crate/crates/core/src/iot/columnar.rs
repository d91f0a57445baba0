use std::collections::BTreeMap;

use super::{
    DeviceDescriptor, DeviceKind, IotError, NormalizedReading, PropertyDescriptor, ReadingValue, Result, ValueKind,
};
use crate::time::Timestamp;
use crate::workspace::{Cell, ColumnDef, ColumnType, ColumnarTable};

/// Fixed column set of normalized reading files.
pub const NORMALIZED_COLUMNS: [(&str, ColumnType); 12] = [
    ("device_id", ColumnType::Utf8),
    ("device_type", ColumnType::Utf8),
    ("device_kind", ColumnType::Utf8),
    ("property", ColumnType::Utf8),
    ("unit", ColumnType::Utf8),
    ("value_numeric", ColumnType::Float64),
    ("value_text", ColumnType::Utf8),
    ("result_time_utc_ms", ColumnType::Int64),
    ("location", ColumnType::Utf8),
    ("object_ref", ColumnType::Utf8),
    ("event_ref", ColumnType::Utf8),
    ("source_row", ColumnType::Int64),
];

/// File metadata keys. Boolean results live in `value_text`; the metadata
/// records which properties are boolean, plus platform/deployment per device.
const META_PROPERTY_TYPES: &str = "ocelink:property_types";
const META_DEVICE_HOSTS: &str = "ocelink:device_hosts";

fn opt(s: &Option<String>) -> Cell {
    s.clone().map_or(Cell::Null, Cell::Utf8)
}

pub fn readings_to_columnar(readings: &[NormalizedReading]) -> ColumnarTable {
    let mut table =
        ColumnarTable::with_columns(NORMALIZED_COLUMNS.iter().map(|(n, t)| ColumnDef::new(*n, *t)).collect());
    let mut property_types: BTreeMap<&str, ValueKind> = BTreeMap::new();
    let mut hosts: BTreeMap<&str, (Option<&str>, Option<&str>)> = BTreeMap::new();
    for r in readings {
        property_types.insert(&r.property.name, r.result.kind());
        if r.device.platform.is_some() || r.device.deployment.is_some() {
            hosts.insert(&r.device.device_id, (r.device.platform.as_deref(), r.device.deployment.as_deref()));
        }
        let (numeric, text) = match &r.result {
            ReadingValue::Numeric(v) => (Cell::Float64(*v), Cell::Null),
            other => (Cell::Null, Cell::Utf8(other.render())),
        };
        table
            .push_row(vec![
                Cell::Utf8(r.device.device_id.clone()),
                Cell::Utf8(r.device.device_type.clone()),
                Cell::Utf8(r.device.device_kind.as_str().to_string()),
                Cell::Utf8(r.property.name.clone()),
                opt(&r.property.unit),
                numeric,
                text,
                Cell::Int64(r.result_time.millis()),
                opt(&r.location),
                opt(&r.object_ref),
                opt(&r.event_ref),
                Cell::Int64(r.source_row as i64),
            ])
            .expect("fixed schema");
    }
    table.metadata.insert(META_PROPERTY_TYPES.into(), serde_json::to_string(&property_types).expect("json"));
    table.metadata.insert(META_DEVICE_HOSTS.into(), serde_json::to_string(&hosts).expect("json"));
    table
}

pub fn readings_from_columnar(table: &ColumnarTable) -> Result<Vec<NormalizedReading>> {
    let idx: Vec<usize> = NORMALIZED_COLUMNS
        .iter()
        .map(|(name, _)| {
            table.column_index(name).ok_or_else(|| IotError::Table(format!("missing column {name}")))
        })
        .collect::<Result<_>>()?;
    let property_types: BTreeMap<String, ValueKind> = table
        .metadata
        .get(META_PROPERTY_TYPES)
        .map(|s| serde_json::from_str(s))
        .transpose()
        .map_err(|e| IotError::Table(e.to_string()))?
        .unwrap_or_default();
    let hosts: BTreeMap<String, (Option<String>, Option<String>)> = table
        .metadata
        .get(META_DEVICE_HOSTS)
        .map(|s| serde_json::from_str(s))
        .transpose()
        .map_err(|e| IotError::Table(e.to_string()))?
        .unwrap_or_default();

    let text = |row: &[Cell], i: usize| row[idx[i]].as_str().map(str::to_string);
    let bad = |what: &str, n: usize| IotError::Table(format!("row {n}: bad {what}"));
    let mut out = Vec::with_capacity(table.len());
    for (n, row) in table.rows().iter().enumerate() {
        let device_id = text(row, 0).ok_or_else(|| bad("device_id", n))?;
        let property = text(row, 3).ok_or_else(|| bad("property", n))?;
        let result = match (&row[idx[5]], text(row, 6)) {
            (Cell::Float64(v), _) => ReadingValue::Numeric(*v),
            (_, Some(s)) if property_types.get(&property) == Some(&ValueKind::Boolean) => {
                ReadingValue::Boolean(s.parse().map_err(|_| bad("boolean", n))?)
            }
            (_, Some(s)) => ReadingValue::Text(s),
            _ => return Err(bad("result", n)),
        };
        let Cell::Int64(ms) = row[idx[7]] else { return Err(bad("result_time_utc_ms", n)) };
        let Cell::Int64(source_row) = row[idx[11]] else { return Err(bad("source_row", n)) };
        let (platform, deployment) = hosts.get(&device_id).cloned().unwrap_or_default();
        out.push(NormalizedReading {
            device: DeviceDescriptor {
                device_kind: text(row, 2).as_deref().and_then(DeviceKind::parse).ok_or_else(|| bad("device_kind", n))?,
                device_type: text(row, 1).ok_or_else(|| bad("device_type", n))?,
                device_id,
                platform,
                deployment,
            },
            property: PropertyDescriptor { name: property, unit: text(row, 4), value_type: result.kind() },
            result,
            result_time: Timestamp::from_millis(ms),
            location: text(row, 8),
            source_row: source_row as usize,
            object_ref: text(row, 9),
            event_ref: text(row, 10),
        });
    }
    Ok(out)
}
