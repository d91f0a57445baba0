use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{IotError, Result, Table, ValueKind};
use crate::time::Timestamp;

/// Schema roles a source column (or constant) can fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    DeviceId,
    DeviceType,
    DeviceKind,
    Property,
    Unit,
    Result,
    ResultTime,
    Location,
    Platform,
    Deployment,
    ObjectRef,
    EventRef,
    SourceRow,
}

impl Role {
    pub const ALL: [Role; 13] = [
        Role::DeviceId,
        Role::DeviceType,
        Role::DeviceKind,
        Role::Property,
        Role::Unit,
        Role::Result,
        Role::ResultTime,
        Role::Location,
        Role::Platform,
        Role::Deployment,
        Role::ObjectRef,
        Role::EventRef,
        Role::SourceRow,
    ];

    pub const REQUIRED: [Role; 4] = [Role::DeviceId, Role::Property, Role::Result, Role::ResultTime];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::DeviceId => "device_id",
            Role::DeviceType => "device_type",
            Role::DeviceKind => "device_kind",
            Role::Property => "property",
            Role::Unit => "unit",
            Role::Result => "result",
            Role::ResultTime => "result_time",
            Role::Location => "location",
            Role::Platform => "platform",
            Role::Deployment => "deployment",
            Role::ObjectRef => "object_ref",
            Role::EventRef => "event_ref",
            Role::SourceRow => "source_row",
        }
    }
}

/// Header synonyms recognised by [`infer_mapping`], after lower-casing and
/// replacing spaces and dashes with `_`.
pub const SYNONYMS: &[(Role, &[&str])] = &[
    (Role::DeviceId, &["device_id", "sensor_id", "actuator_id", "deviceid", "sensorid", "device", "sensor", "node_id"]),
    (Role::DeviceType, &["device_type", "sensor_type", "devicetype", "sensortype", "type"]),
    (Role::DeviceKind, &["device_kind", "kind"]),
    (Role::Property, &[
        "property",
        "observed_property",
        "observable_property",
        "actuatable_property",
        "measurement",
        "quantity",
        "metric",
        "variable",
    ]),
    (Role::Unit, &["unit", "units", "uom", "unit_of_measure"]),
    (Role::Result, &["value", "result", "reading", "measurement_value", "observation_value"]),
    (Role::ResultTime, &[
        "timestamp",
        "result_time",
        "time",
        "datetime",
        "date_time",
        "ts",
        "observed_at",
        "recorded_at",
        "result_time_utc",
    ]),
    (Role::Location, &["location", "loc", "site", "position", "zone"]),
    (Role::Platform, &["platform", "host", "mounted_on"]),
    (Role::Deployment, &["deployment", "installation"]),
    (Role::ObjectRef, &["object_id", "object_ref", "entity_id", "asset_id", "truck_id"]),
    (Role::EventRef, &["event_id", "event_ref"]),
    (Role::SourceRow, &["source_row"]),
];

/// How the columns of a source table fill the schema roles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    #[serde(default)]
    pub columns: BTreeMap<Role, String>,
    /// Whole-file values for roles the table lacks.
    #[serde(default)]
    pub constants: BTreeMap<Role, String>,
    /// `strftime` format tried before the built-in timestamp forms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_format: Option<String>,
    /// Coercion for every result; inferred per cell when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_type: Option<ValueKind>,
    /// Per-property coercions, taking precedence over `result_type`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub property_types: BTreeMap<String, ValueKind>,
}

impl ColumnMapping {
    pub fn is_resolved(&self, role: Role) -> bool {
        self.columns.contains_key(&role) || self.constants.contains_key(&role)
    }

    pub fn unresolved_required(&self) -> Vec<Role> {
        Role::REQUIRED.into_iter().filter(|r| !self.is_resolved(*r)).collect()
    }

    /// Checks the mapping on its own: required roles resolved, no column
    /// used twice.
    pub fn validate(&self) -> Result<()> {
        let missing = self.unresolved_required();
        if !missing.is_empty() {
            let names: Vec<_> = missing.iter().map(|r| r.as_str()).collect();
            return Err(IotError::Mapping(format!("unresolved roles: {}", names.join(", "))));
        }
        let mut seen = BTreeSet::new();
        for col in self.columns.values() {
            if !seen.insert(col) {
                return Err(IotError::Mapping(format!("column {col:?} assigned to more than one role")));
            }
        }
        Ok(())
    }

    /// Checks the mapping against a table's header.
    pub fn validate_for(&self, table: &Table) -> Result<()> {
        self.validate()?;
        for (role, col) in &self.columns {
            if table.column_index(col).is_none() {
                return Err(IotError::Mapping(format!("column {col:?} for role {} not in table", role.as_str())));
            }
        }
        Ok(())
    }

    /// Mapping for tables produced by [`super::readings_to_table`].
    pub fn identity() -> Self {
        ColumnMapping {
            columns: Role::ALL.iter().map(|r| (*r, r.as_str().to_string())).collect(),
            ..Default::default()
        }
    }
}

/// Output of [`infer_mapping`]: a possibly incomplete mapping plus every
/// role nothing was assigned to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingSuggestion {
    pub mapping: ColumnMapping,
    pub unresolved: Vec<Role>,
    pub unmapped_columns: Vec<String>,
}

fn canonical_header(h: &str) -> String {
    h.trim().to_ascii_lowercase().replace([' ', '-'], "_")
}

const TIME_FORMATS: [&str; 5] =
    ["%d/%m/%Y %H:%M:%S", "%m/%d/%Y %H:%M:%S", "%d.%m.%Y %H:%M:%S", "%Y/%m/%d %H:%M:%S", "%d/%m/%Y %H:%M"];

/// Share of sampled values that must parse for a coercion to be suggested.
const SNIFF_QUORUM: f64 = 0.9;

/// Suggests a mapping from header names (see [`SYNONYMS`]) and sniffs the
/// result type and timestamp format from the sample values. Roles without
/// a matching header are reported as unresolved, never guessed.
pub fn infer_mapping(sample: &Table) -> Result<MappingSuggestion> {
    let looks_like_data = |h: &String| {
        let h = h.trim();
        h.is_empty() || h.parse::<f64>().is_ok() || Timestamp::parse(h).is_ok()
    };
    if sample.headers.is_empty() || sample.headers.iter().all(looks_like_data) {
        return Err(IotError::Mapping("table has no header row".into()));
    }

    let mut mapping = ColumnMapping::default();
    let mut used = BTreeSet::new();
    for (role, names) in SYNONYMS {
        'names: for name in *names {
            for (i, h) in sample.headers.iter().enumerate() {
                if !used.contains(&i) && canonical_header(h) == *name {
                    mapping.columns.insert(*role, h.clone());
                    used.insert(i);
                    break 'names;
                }
            }
        }
    }

    let values = |col: &str| -> Vec<&str> {
        let idx = sample.column_index(col).expect("mapped column");
        (0..sample.rows.len()).filter_map(|r| sample.cell(r, idx)).collect()
    };
    let quorum = |hits: usize, total: usize| total > 0 && hits as f64 >= SNIFF_QUORUM * total as f64;

    if let Some(col) = mapping.columns.get(&Role::Result).cloned() {
        let vals = values(&col);
        let numeric = vals.iter().filter(|v| v.parse::<f64>().is_ok_and(f64::is_finite)).count();
        let boolean = vals.iter().filter(|v| matches!(v.to_ascii_lowercase().as_str(), "true" | "false")).count();
        if quorum(numeric, vals.len()) {
            mapping.result_type = Some(ValueKind::Numeric);
        } else if quorum(boolean, vals.len()) {
            mapping.result_type = Some(ValueKind::Boolean);
        }
    }
    if let Some(col) = mapping.columns.get(&Role::ResultTime).cloned() {
        let vals = values(&col);
        let builtin = vals.iter().filter(|v| Timestamp::parse(v).is_ok()).count();
        if !quorum(builtin, vals.len()) {
            mapping.timestamp_format = TIME_FORMATS
                .iter()
                .find(|f| quorum(vals.iter().filter(|v| Timestamp::parse_with(v, Some(f)).is_ok()).count(), vals.len()))
                .map(|f| f.to_string());
        }
    }

    let unresolved = Role::ALL.into_iter().filter(|r| !mapping.is_resolved(*r)).collect();
    let unmapped_columns =
        sample.headers.iter().enumerate().filter(|(i, _)| !used.contains(i)).map(|(_, h)| h.clone()).collect();
    Ok(MappingSuggestion { mapping, unresolved, unmapped_columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(headers: &[&str], rows: &[&[&str]]) -> Table {
        Table::new(
            headers.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        )
    }

    #[test]
    fn synonyms_resolve_core_roles_but_not_property() {
        let t = table(&["sensor_id", "value", "timestamp"], &[&["s1", "1.5", "2024-01-01T00:00:00Z"]]);
        let s = infer_mapping(&t).unwrap();
        assert_eq!(s.mapping.columns[&Role::DeviceId], "sensor_id");
        assert_eq!(s.mapping.columns[&Role::Result], "value");
        assert_eq!(s.mapping.columns[&Role::ResultTime], "timestamp");
        assert!(s.unresolved.contains(&Role::Property));
        assert_eq!(s.mapping.result_type, Some(ValueKind::Numeric));
        assert!(s.mapping.validate().is_err());
    }

    #[test]
    fn unknown_headers_leave_everything_unresolved() {
        let t = table(&["a", "b", "c"], &[&["1", "2", "3"]]);
        let s = infer_mapping(&t).unwrap();
        assert!(s.mapping.columns.is_empty());
        assert_eq!(s.unresolved, Role::ALL.to_vec());
        assert_eq!(s.unmapped_columns, ["a", "b", "c"]);
    }

    #[test]
    fn headerless_table_is_an_error() {
        assert!(infer_mapping(&table(&[], &[])).is_err());
        assert!(infer_mapping(&table(&["12.5", "2024-01-01"], &[])).is_err());
    }

    #[test]
    fn sniffs_timestamp_format() {
        let t = table(&["device", "reading", "Recorded At", "metric"], &[
            &["d", "1", "31/01/2024 10:00:00", "t"],
            &["d", "2", "01/02/2024 11:30:00", "t"],
        ]);
        let s = infer_mapping(&t).unwrap();
        assert_eq!(s.mapping.columns[&Role::ResultTime], "Recorded At");
        assert_eq!(s.mapping.timestamp_format.as_deref(), Some("%d/%m/%Y %H:%M:%S"));
        s.mapping.validate_for(&t).unwrap();
    }

    #[test]
    fn duplicate_column_assignment_is_rejected() {
        let mut m = ColumnMapping::default();
        m.columns.insert(Role::DeviceId, "x".into());
        m.columns.insert(Role::Property, "x".into());
        m.columns.insert(Role::Result, "v".into());
        m.columns.insert(Role::ResultTime, "t".into());
        assert!(m.validate().is_err());
    }

    #[test]
    fn mapping_json_shape() {
        let json = r#"{"columns":{"device_id":"sensor_id","result":"value","result_time":"timestamp"},
                       "constants":{"property":"temperature"},"result_type":"numeric"}"#;
        let m: ColumnMapping = serde_json::from_str(json).unwrap();
        assert!(m.validate().is_ok());
    }
}
