use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::model::OcelLog;

/// Descriptive counts of a log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcelStats {
    pub event_count: usize,
    pub object_count: usize,
    pub activity_count: usize,
    pub object_type_count: usize,
    pub e2o_count: usize,
    pub o2o_count: usize,
    pub per_activity_counts: BTreeMap<String, usize>,
    pub per_object_type_counts: BTreeMap<String, usize>,
}

pub fn log_statistics(log: &OcelLog) -> OcelStats {
    let mut per_activity_counts = BTreeMap::new();
    for e in &log.events {
        *per_activity_counts.entry(e.activity.clone()).or_insert(0) += 1;
    }
    let mut per_object_type_counts = BTreeMap::new();
    for o in &log.objects {
        *per_object_type_counts.entry(o.object_type.clone()).or_insert(0) += 1;
    }
    let activities: BTreeSet<_> = per_activity_counts.keys().collect();
    let types: BTreeSet<_> = per_object_type_counts.keys().collect();
    OcelStats {
        event_count: log.events.len(),
        object_count: log.objects.len(),
        activity_count: activities.len(),
        object_type_count: types.len(),
        e2o_count: log.e2o.len(),
        o2o_count: log.o2o.len(),
        per_activity_counts,
        per_object_type_counts,
    }
}
