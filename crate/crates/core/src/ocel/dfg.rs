use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::OcelLog;
use super::{OcelError, Result};

/// One edge of an object-type directly-follows graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DfgEdge {
    pub object_type: String,
    pub from_activity: String,
    pub to_activity: String,
    pub frequency: u64,
}

/// Directly-follows counts for one object type.
///
/// Each object's related events (deduplicated by id) are ordered by
/// `(time, event id)`; every consecutive activity pair adds one to its edge.
/// Edges are returned sorted by `(from, to)`.
pub fn directly_follows(log: &OcelLog, object_type: &str) -> Result<Vec<DfgEdge>> {
    if !log.has_object_type(object_type) {
        return Err(OcelError::NotFound { kind: "object type", name: object_type.to_string() });
    }
    let events = log.event_index();
    let related = log.events_by_object();
    let mut counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for obj in log.objects.iter().filter(|o| o.object_type == object_type) {
        let Some(ids) = related.get(obj.id.as_str()) else { continue };
        let mut trace: Vec<_> = ids.iter().filter_map(|id| events.get(id)).collect();
        trace.sort_by(|a, b| (a.time, &a.id).cmp(&(b.time, &b.id)));
        for pair in trace.windows(2) {
            *counts.entry((pair[0].activity.as_str(), pair[1].activity.as_str())).or_insert(0) += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|((from, to), frequency)| DfgEdge {
            object_type: object_type.to_string(),
            from_activity: from.to_string(),
            to_activity: to.to_string(),
            frequency,
        })
        .collect())
}
