use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::model::OcelLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyId,
    DuplicateId,
    DanglingReference,
    UnknownType,
    UndeclaredAttribute,
    HistoryOutOfOrder,
}

/// A structural problem in a log, located by table and row key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub table: String,
    pub locator: String,
}

impl Violation {
    fn new(kind: ViolationKind, table: impl Into<String>, locator: impl Into<String>) -> Self {
        Violation { kind, table: table.into(), locator: locator.into() }
    }
}

/// Checks every structural invariant of the OCEL model. An empty result
/// means the log is well formed.
pub fn validate_ocel(log: &OcelLog) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for e in &log.events {
        if e.id.is_empty() {
            out.push(Violation::new(EmptyId, "event", e.activity.clone()));
        } else if !seen.insert(e.id.as_str()) {
            out.push(Violation::new(DuplicateId, "event", e.id.clone()));
        }
        match log.event_type(&e.activity) {
            None => out.push(Violation::new(UnknownType, "event", e.id.clone())),
            Some(t) => {
                for name in e.attributes.keys() {
                    if t.attribute(name).is_none() {
                        out.push(Violation::new(
                            UndeclaredAttribute,
                            format!("event_{}", t.table_suffix),
                            format!("{}.{}", e.id, name),
                        ));
                    }
                }
            }
        }
    }
    let event_ids = seen;

    let mut seen = HashSet::new();
    for o in &log.objects {
        if o.id.is_empty() {
            out.push(Violation::new(EmptyId, "object", o.object_type.clone()));
        } else if !seen.insert(o.id.as_str()) {
            out.push(Violation::new(DuplicateId, "object", o.id.clone()));
        }
        let schema = log.object_type(&o.object_type);
        if schema.is_none() && !o.states.is_empty() {
            out.push(Violation::new(UnknownType, "object", o.id.clone()));
        }
        if let Some(t) = schema {
            let table = format!("object_{}", t.table_suffix);
            for state in &o.states {
                for name in state.values.keys().chain(state.changed_field.iter()) {
                    if t.attribute(name).is_none() {
                        out.push(Violation::new(UndeclaredAttribute, table.clone(), format!("{}.{}", o.id, name)));
                    }
                }
            }
            let mut last = HashMap::new();
            for change in o.attribute_history() {
                if let Some(prev) = last.insert(change.name.clone(), change.time) {
                    if prev > change.time {
                        out.push(Violation::new(
                            HistoryOutOfOrder,
                            table.clone(),
                            format!("{}.{}", o.id, change.name),
                        ));
                    }
                }
            }
        }
    }
    let object_ids = seen;

    for r in &log.e2o {
        if !event_ids.contains(r.event_id.as_str()) {
            out.push(Violation::new(DanglingReference, "event_object", r.event_id.clone()));
        }
        if !object_ids.contains(r.object_id.as_str()) {
            out.push(Violation::new(DanglingReference, "event_object", r.object_id.clone()));
        }
    }
    for r in &log.o2o {
        for id in [&r.source_id, &r.target_id] {
            if !object_ids.contains(id.as_str()) {
                out.push(Violation::new(DanglingReference, "object_object", id.clone()));
            }
        }
    }
    out
}
