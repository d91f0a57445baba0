use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::spec::{CorrelationMode, CorrelationRule, Target};
use super::{IntegrationError, Result};
use crate::iot::NormalizedReading;
use crate::ocel::OcelLog;
use crate::time::Timestamp;

/// Readings grouped by the event or object they correlate with.
///
/// `targets` lists every candidate in log order; `groups` holds only
/// candidates with at least one reading, as ascending reading indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSet {
    pub targets: Vec<String>,
    pub groups: BTreeMap<String, Vec<usize>>,
}

impl MatchSet {
    pub fn group(&self, target_id: &str) -> &[usize] {
        self.groups.get(target_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn matched_readings(&self) -> BTreeSet<usize> {
        self.groups.values().flatten().copied().collect()
    }

    pub fn unmatched_targets(&self) -> usize {
        self.targets.len() - self.groups.len()
    }
}

struct Relations<'a> {
    by_event: HashMap<&'a str, BTreeSet<&'a str>>,
    by_object: HashMap<&'a str, BTreeSet<&'a str>>,
    event_time: HashMap<&'a str, Timestamp>,
    object_type: HashMap<&'a str, &'a str>,
}

impl<'a> Relations<'a> {
    fn new(log: &'a OcelLog) -> Self {
        Relations {
            by_event: log.objects_by_event(),
            by_object: log.events_by_object(),
            event_time: log.events.iter().map(|e| (e.id.as_str(), e.time)).collect(),
            object_type: log.objects.iter().map(|o| (o.id.as_str(), o.object_type.as_str())).collect(),
        }
    }

    fn objects_of(&self, event: &str) -> impl Iterator<Item = &'a str> + '_ {
        self.by_event.get(event).into_iter().flatten().copied()
    }

    fn events_of(&self, object: &str) -> impl Iterator<Item = &'a str> + '_ {
        self.by_object.get(object).into_iter().flatten().copied()
    }

    fn is_type(&self, object: &str, ty: Option<&str>) -> bool {
        ty.is_none_or(|t| self.object_type.get(object) == Some(&t))
    }

    /// First and last related event time of an object.
    fn span(&self, object: &str) -> Option<(Timestamp, Timestamp)> {
        let mut times = self.events_of(object).filter_map(|e| self.event_time.get(e).copied());
        let first = times.next()?;
        Some(times.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t))))
    }
}

/// Reading indices sorted by result time, for range lookups.
struct TimeIndex {
    order: Vec<(Timestamp, usize)>,
}

impl TimeIndex {
    fn new(readings: &[NormalizedReading]) -> Self {
        let mut order: Vec<_> = readings.iter().enumerate().map(|(i, r)| (r.result_time, i)).collect();
        order.sort();
        TimeIndex { order }
    }

    /// Indices with `lo <= time <= hi`.
    fn between(&self, lo: Timestamp, hi: Timestamp) -> impl Iterator<Item = usize> + '_ {
        let start = self.order.partition_point(|(t, _)| *t < lo);
        let end = self.order.partition_point(|(t, _)| *t <= hi);
        self.order[start..end.max(start)].iter().map(|(_, i)| *i)
    }
}

/// Groups `readings` by the events of an activity or the objects of a type.
///
/// Errors with [`IntegrationError::NotFound`] for an unknown target and with
/// [`IntegrationError::Correlation`] when an explicit-key mode is used but no
/// reading carries that key.
pub fn correlate(
    readings: &[NormalizedReading],
    log: &OcelLog,
    rule: &CorrelationRule,
    target: &Target,
) -> Result<MatchSet> {
    rule.validate()?;
    let targets: Vec<&str> = match target {
        Target::Activity(a) => {
            if !log.has_activity(a) {
                return Err(IntegrationError::NotFound { kind: "activity", name: a.clone() });
            }
            log.events.iter().filter(|e| &e.activity == a).map(|e| e.id.as_str()).collect()
        }
        Target::ObjectType(t) => {
            if !log.has_object_type(t) {
                return Err(IntegrationError::NotFound { kind: "object type", name: t.clone() });
            }
            log.objects.iter().filter(|o| &o.object_type == t).map(|o| o.id.as_str()).collect()
        }
    };
    if let Some(scope) = &rule.object_type_scope {
        if !log.has_object_type(scope) {
            return Err(IntegrationError::NotFound { kind: "object type", name: scope.clone() });
        }
    }
    let key_missing = |name: &str| {
        IntegrationError::Correlation(format!("{} readings carry no {name}", readings.len()))
    };
    match rule.mode {
        CorrelationMode::ExplicitEventKey if !readings.is_empty() && readings.iter().all(|r| r.event_ref.is_none()) => {
            return Err(key_missing("event reference"));
        }
        CorrelationMode::ExplicitObjectKey if !readings.is_empty() && readings.iter().all(|r| r.object_ref.is_none()) => {
            return Err(key_missing("object reference"));
        }
        _ => {}
    }

    let rel = Relations::new(log);
    let candidate: BTreeSet<&str> = targets.iter().copied().collect();
    let scope = rule.object_type_scope.as_deref();
    let mut groups: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut add = |id: &str, i: usize| {
        groups.entry(id.to_string()).or_default().insert(i);
    };

    match (rule.mode, target) {
        (CorrelationMode::ExplicitEventKey, Target::Activity(_)) => {
            for (i, r) in readings.iter().enumerate() {
                if let Some(e) = r.event_ref.as_deref().filter(|e| candidate.contains(e)) {
                    add(e, i);
                }
            }
        }
        (CorrelationMode::ExplicitEventKey, Target::ObjectType(_)) => {
            for (i, r) in readings.iter().enumerate() {
                let Some(e) = r.event_ref.as_deref() else { continue };
                for o in rel.objects_of(e).filter(|o| candidate.contains(o)) {
                    add(o, i);
                }
            }
        }
        (CorrelationMode::ExplicitObjectKey, Target::Activity(_)) => {
            for (i, r) in readings.iter().enumerate() {
                let Some(o) = r.object_ref.as_deref().filter(|o| rel.is_type(o, scope)) else { continue };
                for e in rel.events_of(o).filter(|e| candidate.contains(e)) {
                    add(e, i);
                }
            }
        }
        (CorrelationMode::ExplicitObjectKey, Target::ObjectType(_)) => {
            for (i, r) in readings.iter().enumerate() {
                if let Some(o) = r.object_ref.as_deref().filter(|o| candidate.contains(o)) {
                    add(o, i);
                }
            }
        }
        (CorrelationMode::TimeWindow, _) => {
            let idx = TimeIndex::new(readings);
            let (before, after) = (rule.window_before_ms, rule.window_after_ms);
            let mut windows: Vec<(&str, Timestamp)> = Vec::new();
            match target {
                Target::Activity(_) => {
                    windows.extend(targets.iter().filter_map(|e| Some((*e, *rel.event_time.get(e)?))));
                }
                Target::ObjectType(_) => {
                    for o in &targets {
                        windows.extend(rel.events_of(o).filter_map(|e| Some((*o, *rel.event_time.get(e)?))));
                    }
                }
            }
            for (id, t) in windows {
                for i in idx.between(t.plus_millis(-before), t.plus_millis(after)) {
                    add(id, i);
                }
            }
        }
        (CorrelationMode::LifecycleSpan, Target::ObjectType(_)) => {
            let idx = TimeIndex::new(readings);
            for o in &targets {
                if let Some((lo, hi)) = rel.span(o) {
                    for i in idx.between(lo, hi) {
                        add(o, i);
                    }
                }
            }
        }
        (CorrelationMode::LifecycleSpan, Target::Activity(_)) => {
            let idx = TimeIndex::new(readings);
            let mut spans: HashMap<&str, Option<(Timestamp, Timestamp)>> = HashMap::new();
            for e in &targets {
                for o in rel.objects_of(e).filter(|o| rel.is_type(o, scope)) {
                    if let Some((lo, hi)) = *spans.entry(o).or_insert_with(|| rel.span(o)) {
                        for i in idx.between(lo, hi) {
                            add(e, i);
                        }
                    }
                }
            }
        }
    }

    Ok(MatchSet {
        targets: targets.into_iter().map(str::to_string).collect(),
        groups: groups.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect(),
    })
}
