use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::NormalizedReading;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTypeSummary {
    pub device_type: String,
    pub record_count: usize,
    pub device_count: usize,
    pub properties: Vec<String>,
    pub first_time: Timestamp,
    pub last_time: Timestamp,
    pub numeric_ranges: BTreeMap<String, NumericRange>,
}

/// Per-device-type record counts, ordered by device type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceSummary {
    pub device_types: Vec<DeviceTypeSummary>,
    pub total_records: usize,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl DeviceSummary {
    pub fn get(&self, device_type: &str) -> Option<&DeviceTypeSummary> {
        self.device_types.iter().find(|s| s.device_type == device_type)
    }

    pub fn counts(&self) -> BTreeMap<String, usize> {
        self.device_types.iter().map(|s| (s.device_type.clone(), s.record_count)).collect()
    }
}

pub fn device_summary(readings: &[NormalizedReading]) -> DeviceSummary {
    let mut groups: BTreeMap<&str, Vec<&NormalizedReading>> = BTreeMap::new();
    for r in readings {
        groups.entry(r.device.device_type.as_str()).or_default().push(r);
    }
    let device_types = groups
        .into_iter()
        .map(|(ty, rs)| {
            let devices: BTreeSet<&str> = rs.iter().map(|r| r.device.device_id.as_str()).collect();
            let properties: BTreeSet<&str> = rs.iter().map(|r| r.property.name.as_str()).collect();
            let mut numeric_ranges: BTreeMap<String, NumericRange> = BTreeMap::new();
            for r in &rs {
                if let Some(v) = r.result.as_f64() {
                    numeric_ranges
                        .entry(r.property.name.clone())
                        .and_modify(|range| {
                            range.min = range.min.min(v);
                            range.max = range.max.max(v);
                        })
                        .or_insert(NumericRange { min: v, max: v });
                }
            }
            DeviceTypeSummary {
                device_type: ty.to_string(),
                record_count: rs.len(),
                device_count: devices.len(),
                properties: properties.into_iter().map(str::to_string).collect(),
                first_time: rs.iter().map(|r| r.result_time).min().expect("non-empty group"),
                last_time: rs.iter().map(|r| r.result_time).max().expect("non-empty group"),
                numeric_ranges,
            }
        })
        .collect();
    DeviceSummary { device_types, total_records: readings.len(), flags: Vec::new() }
}
