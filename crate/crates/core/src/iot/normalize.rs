use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::mapping::{ColumnMapping, Role};
use super::{
    DeviceDescriptor, DeviceKind, NormalizedReading, PropertyDescriptor, ReadingValue, Result, Table,
    ValueKind,
};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    MissingRequiredField,
    UnparseableTimestamp,
    UnparseableNumber,
    UnparseableBoolean,
    InvalidDeviceKind,
    ConflictingDeviceKind,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::MissingRequiredField => "missing-required-field",
            RejectReason::UnparseableTimestamp => "unparseable-timestamp",
            RejectReason::UnparseableNumber => "unparseable-number",
            RejectReason::UnparseableBoolean => "unparseable-boolean",
            RejectReason::InvalidDeviceKind => "invalid-device-kind",
            RejectReason::ConflictingDeviceKind => "conflicting-device-kind",
        }
    }
}

/// A source row that could not become a reading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub source_row: usize,
    pub reason: RejectReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub readings: Vec<NormalizedReading>,
    pub rejects: Vec<Reject>,
    /// Accepted rows whose device kind fell back to `sensor`.
    pub kind_defaulted: usize,
    /// Accepted rows whose location joined platform and deployment.
    pub merged_locations: usize,
}

impl Normalized {
    pub fn input_rows(&self) -> usize {
        self.readings.len() + self.rejects.len()
    }

    pub fn flags(&self) -> Vec<String> {
        let mut flags = Vec::new();
        if self.kind_defaulted > 0 {
            flags.push(format!("device_kind defaulted to sensor for {} readings", self.kind_defaulted));
        }
        if self.merged_locations > 0 {
            flags.push(format!("location merged from platform/deployment for {} readings", self.merged_locations));
        }
        flags
    }
}

struct Resolver<'a> {
    table: &'a Table,
    mapping: &'a ColumnMapping,
    columns: HashMap<Role, usize>,
}

impl<'a> Resolver<'a> {
    fn get(&self, row: usize, role: Role) -> Option<&'a str> {
        match self.columns.get(&role) {
            Some(&col) => self.table.cell(row, col),
            None => self.mapping.constants.get(&role).map(|s| s.trim()).filter(|s| !s.is_empty()),
        }
    }
}

fn reject(source_row: usize, reason: RejectReason, detail: impl Into<String>) -> Reject {
    Reject { source_row, reason, detail: detail.into() }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Maps every row of `table` to a reading or a reject; nothing is dropped.
pub fn normalize(table: &Table, mapping: &ColumnMapping) -> Result<Normalized> {
    mapping.validate_for(table)?;
    let columns = mapping
        .columns
        .iter()
        .map(|(role, col)| (*role, table.column_index(col).expect("validated")))
        .collect();
    let res = Resolver { table, mapping, columns };

    let mut out = Normalized::default();
    let mut kinds: HashMap<String, DeviceKind> = HashMap::new();
    for row in 0..table.rows.len() {
        match normalize_row(&res, row, &mut kinds) {
            Ok((reading, defaulted, merged)) => {
                out.kind_defaulted += usize::from(defaulted);
                out.merged_locations += usize::from(merged);
                out.readings.push(reading);
            }
            Err(r) => out.rejects.push(r),
        }
    }
    Ok(out)
}

fn normalize_row(
    res: &Resolver<'_>,
    row: usize,
    kinds: &mut HashMap<String, DeviceKind>,
) -> std::result::Result<(NormalizedReading, bool, bool), Reject> {
    let require = |role: Role| {
        res.get(row, role)
            .ok_or_else(|| reject(row, RejectReason::MissingRequiredField, format!("{} is empty", role.as_str())))
    };
    let device_id = require(Role::DeviceId)?;
    let property = require(Role::Property)?;
    let raw_result = require(Role::Result)?;
    let raw_time = require(Role::ResultTime)?;

    let source_row = match res.get(row, Role::SourceRow) {
        Some(s) => s
            .parse::<usize>()
            .map_err(|_| reject(row, RejectReason::UnparseableNumber, format!("source_row {s:?}")))?,
        None => row,
    };
    let err_row = source_row;

    let result_time = Timestamp::parse_with(raw_time, res.mapping.timestamp_format.as_deref())
        .map_err(|_| reject(err_row, RejectReason::UnparseableTimestamp, format!("{raw_time:?}")))?;

    let declared = res.mapping.property_types.get(property).copied().or(res.mapping.result_type);
    let parse_number = || {
        raw_result
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| reject(err_row, RejectReason::UnparseableNumber, format!("{raw_result:?}")))
    };
    let result = match declared {
        Some(ValueKind::Numeric) => ReadingValue::Numeric(parse_number()?),
        Some(ValueKind::Boolean) => ReadingValue::Boolean(
            parse_bool(raw_result)
                .ok_or_else(|| reject(err_row, RejectReason::UnparseableBoolean, format!("{raw_result:?}")))?,
        ),
        Some(ValueKind::Textual) => ReadingValue::Text(raw_result.to_string()),
        None => parse_number().map(ReadingValue::Numeric).unwrap_or_else(|_| ReadingValue::Text(raw_result.into())),
    };

    let (device_kind, defaulted) = match res.get(row, Role::DeviceKind) {
        Some(k) => (
            DeviceKind::parse(k).ok_or_else(|| reject(err_row, RejectReason::InvalidDeviceKind, format!("{k:?}")))?,
            false,
        ),
        None => (DeviceKind::Sensor, true),
    };
    match kinds.get(device_id) {
        Some(prev) if *prev != device_kind => {
            return Err(reject(
                err_row,
                RejectReason::ConflictingDeviceKind,
                format!("{device_id} was {} before", prev.as_str()),
            ))
        }
        _ => {
            kinds.insert(device_id.to_string(), device_kind);
        }
    }

    let platform = res.get(row, Role::Platform).map(str::to_string);
    let deployment = res.get(row, Role::Deployment).map(str::to_string);
    let (location, merged) = match (res.get(row, Role::Location), &platform, &deployment) {
        (Some(loc), _, _) => (Some(loc.to_string()), false),
        (None, Some(p), Some(d)) => (Some(format!("{p}/{d}")), true),
        (None, p, d) => (p.clone().or_else(|| d.clone()), false),
    };

    let reading = NormalizedReading {
        device: DeviceDescriptor {
            device_id: device_id.to_string(),
            device_type: res.get(row, Role::DeviceType).unwrap_or("unspecified").to_string(),
            device_kind,
            platform,
            deployment,
        },
        property: PropertyDescriptor {
            name: property.to_string(),
            unit: res.get(row, Role::Unit).map(str::to_string),
            value_type: result.kind(),
        },
        result,
        result_time,
        location,
        source_row,
        object_ref: res.get(row, Role::ObjectRef).map(str::to_string),
        event_ref: res.get(row, Role::EventRef).map(str::to_string),
    };
    Ok((reading, defaulted, merged))
}

/// Renders readings back into a table readable with
/// [`ColumnMapping::identity`] plus the returned per-property coercions.
pub fn readings_to_table(readings: &[NormalizedReading]) -> (Table, ColumnMapping) {
    let headers = Role::ALL.iter().map(|r| r.as_str().to_string()).collect();
    let opt = |o: &Option<String>| o.clone().unwrap_or_default();
    let rows = readings
        .iter()
        .map(|r| {
            Role::ALL
                .iter()
                .map(|role| match role {
                    Role::DeviceId => r.device.device_id.clone(),
                    Role::DeviceType => r.device.device_type.clone(),
                    Role::DeviceKind => r.device.device_kind.as_str().to_string(),
                    Role::Property => r.property.name.clone(),
                    Role::Unit => opt(&r.property.unit),
                    Role::Result => r.result.render(),
                    Role::ResultTime => r.result_time.to_string(),
                    Role::Location => opt(&r.location),
                    Role::Platform => opt(&r.device.platform),
                    Role::Deployment => opt(&r.device.deployment),
                    Role::ObjectRef => opt(&r.object_ref),
                    Role::EventRef => opt(&r.event_ref),
                    Role::SourceRow => r.source_row.to_string(),
                })
                .collect()
        })
        .collect();
    let mut mapping = ColumnMapping::identity();
    for r in readings {
        mapping.property_types.insert(r.property.name.clone(), r.result.kind());
    }
    (Table::new(headers, rows), mapping)
}
