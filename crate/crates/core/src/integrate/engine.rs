use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::correlate::{correlate, MatchSet};
use super::manipulate::{aggregate, filter_range};
use super::spec::{IntegrationSpec, ManipulationKind, Pattern};
use super::{IntegrationError, Result};
use crate::digest::sha256_hex;
use crate::iot::{DeviceDescriptor, NormalizedReading, ReadingValue};
use crate::ocel::{
    AdditionSet, ApplyReceipt, AttrValue, ColumnAddition, E2ORelation, EventAttributeWrite, O2ORelation,
    ObjectAttributeRow, ObjectState, OcelLog, OcelObject, ValueType,
};
use crate::time::Timestamp;

pub const DEFAULT_PREVIEW_LIMIT: usize = 20;

/// Attributes every materialized device object carries.
pub const DEVICE_ATTRIBUTES: [&str; 3] = ["device_kind", "platform", "deployment"];

/// One value the integration writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputedValue {
    pub target_id: String,
    pub value: AttrValue,
    /// Latest contributing reading time; the state time for object rows.
    pub time: Timestamp,
    pub reading_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchGroup {
    pub target_id: String,
    pub reading_count: usize,
}

/// Dry-run result of an [`IntegrationSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentPlan {
    pub plan_id: String,
    pub spec: IntegrationSpec,
    /// Hash over the spec, the log and the selected readings.
    pub input_digest: String,
    pub selected_readings: usize,
    pub value_type: ValueType,
    pub match_groups: Vec<MatchGroup>,
    pub unmatched_target_count: usize,
    pub unmatched_reading_count: usize,
    pub preview: Vec<ComputedValue>,
    pub total_values: usize,
    pub devices_to_materialize: Vec<String>,
    pub expected: ApplyReceipt,
    pub warnings: Vec<String>,
}

/// What an execution wrote; equal to the store's [`ApplyReceipt`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichmentReport {
    pub plan_id: String,
    pub object_types_added: usize,
    pub columns_added: usize,
    pub attribute_writes: usize,
    pub objects_added: usize,
    pub relations_added: usize,
    pub warnings: Vec<String>,
}

impl EnrichmentReport {
    fn new(plan_id: &str, r: &ApplyReceipt, warnings: Vec<String>) -> Self {
        EnrichmentReport {
            plan_id: plan_id.to_string(),
            object_types_added: r.object_types_added,
            columns_added: r.columns_added,
            attribute_writes: r.event_attribute_writes + r.object_attribute_rows,
            objects_added: r.objects_added,
            relations_added: r.e2o_added + r.o2o_added,
            warnings,
        }
    }

    pub fn matches_receipt(&self, r: &ApplyReceipt) -> bool {
        *self == EnrichmentReport::new(&self.plan_id, r, self.warnings.clone())
    }
}

/// Readings of the spec's device type (and property, when set), in input order.
pub fn select_readings(spec: &IntegrationSpec, readings: &[NormalizedReading]) -> Vec<NormalizedReading> {
    readings
        .iter()
        .filter(|r| r.device.device_type == spec.device_type)
        .filter(|r| spec.property.as_ref().is_none_or(|p| &r.property.name == p))
        .cloned()
        .collect()
}

fn input_digest(spec: &IntegrationSpec, log: &OcelLog, selected: &[NormalizedReading]) -> String {
    let mut buf = serde_json::to_vec(spec).expect("serializable spec");
    buf.push(0);
    buf.extend(serde_json::to_vec(log).expect("serializable log"));
    buf.push(0);
    buf.extend(serde_json::to_vec(selected).expect("serializable readings"));
    sha256_hex(&buf)
}

struct Computation {
    digest: String,
    selected: usize,
    matches: MatchSet,
    value_type: ValueType,
    values: Vec<ComputedValue>,
    devices: Vec<String>,
    additions: AdditionSet,
    warnings: Vec<String>,
}

fn column_type(selected: &[NormalizedReading], kind: ManipulationKind) -> ValueType {
    if kind != ManipulationKind::Raw {
        return ValueType::Float;
    }
    let mut kinds = selected.iter().map(|r| std::mem::discriminant(&r.result));
    match (kinds.next(), selected.first()) {
        (Some(first), Some(r)) if kinds.all(|k| k == first) => match r.result {
            ReadingValue::Numeric(_) => ValueType::Float,
            ReadingValue::Boolean(_) => ValueType::Boolean,
            ReadingValue::Text(_) => ValueType::Text,
        },
        _ => ValueType::Text,
    }
}

fn to_attr(v: &ReadingValue, ty: ValueType) -> AttrValue {
    match (v, ty) {
        (ReadingValue::Numeric(x), ValueType::Float) => AttrValue::Float(*x),
        (ReadingValue::Boolean(b), ValueType::Boolean) => AttrValue::Boolean(*b),
        (other, _) => AttrValue::Text(other.render()),
    }
}

fn by_time(mut rs: Vec<&NormalizedReading>) -> Vec<&NormalizedReading> {
    rs.sort_by_key(|r| (r.result_time, r.source_row));
    rs
}

fn compute(spec: &IntegrationSpec, log: &OcelLog, readings: &[NormalizedReading]) -> Result<Computation> {
    spec.validate_against(log)?;
    let selected = select_readings(spec, readings);
    let digest = input_digest(spec, log, &selected);
    let kind = spec.manipulation.kind;
    if kind != ManipulationKind::Raw {
        if let Some(r) = selected.iter().find(|r| r.result.as_f64().is_none()) {
            return Err(IntegrationError::TypeMismatch(format!(
                "aggregation needs numeric readings; property {:?} of device {:?} has {:?}",
                r.property.name,
                r.device.device_id,
                r.result.render()
            )));
        }
    }
    let matches = correlate(&selected, log, &spec.correlation, &spec.target())?;
    let mut value_type = column_type(&selected, kind);
    let multi = kind == ManipulationKind::Raw
        && spec.pattern == Pattern::EventAttribute
        && matches.groups.values().any(|g| g.len() > 1);
    if multi {
        value_type = ValueType::Text;
    }

    let mut warnings = Vec::new();
    let mut values = Vec::new();
    let mut filtered_empty = 0;
    // Readings that produced a value, per target.
    let mut contributing: BTreeMap<&str, Vec<&NormalizedReading>> = BTreeMap::new();
    for target in &matches.targets {
        let group: Vec<&NormalizedReading> = matches.group(target).iter().map(|&i| &selected[i]).collect();
        if group.is_empty() {
            continue;
        }
        let used = match (kind, &spec.manipulation.range) {
            (ManipulationKind::FilterThenAggregate, Some(range)) => filter_range(group, range)?,
            _ => group,
        };
        if used.is_empty() {
            filtered_empty += 1;
            continue;
        }
        let used = by_time(used);
        let latest = used.iter().map(|r| r.result_time).max().expect("non-empty group");
        match kind {
            ManipulationKind::Raw if spec.pattern == Pattern::ObjectAttribute => {
                values.extend(used.iter().map(|r| ComputedValue {
                    target_id: target.clone(),
                    value: to_attr(&r.result, value_type),
                    time: r.result_time,
                    reading_count: 1,
                }));
            }
            ManipulationKind::Raw => {
                let value = if multi {
                    let list: Vec<&ReadingValue> = used.iter().map(|r| &r.result).collect();
                    AttrValue::Text(serde_json::to_string(&list).expect("serializable values"))
                } else {
                    to_attr(&used[0].result, value_type)
                };
                values.push(ComputedValue { target_id: target.clone(), value, time: latest, reading_count: used.len() });
            }
            _ => {
                let nums: Vec<f64> = used.iter().filter_map(|r| r.result.as_f64()).collect();
                let f = spec.manipulation.agg_fn.expect("validated aggregation");
                values.push(ComputedValue {
                    target_id: target.clone(),
                    value: AttrValue::Float(aggregate(&nums, f)?),
                    time: latest,
                    reading_count: used.len(),
                });
            }
        }
        contributing.insert(target.as_str(), used);
    }

    if selected.is_empty() {
        warnings.push(format!("no readings for device type {:?}", spec.device_type));
    }
    if multi {
        let n = matches.groups.values().filter(|g| g.len() > 1).count();
        warnings.push(format!("raw multi-valued: serialized list ({n} targets)"));
    }
    if matches.unmatched_targets() > 0 {
        warnings.push(format!("{} targets without readings: value left null", matches.unmatched_targets()));
    }
    if filtered_empty > 0 {
        warnings.push(format!("{filtered_empty} groups empty after range filter: value left null"));
    }
    let unmatched_readings = selected.len() - matches.matched_readings().len();
    if unmatched_readings > 0 {
        warnings.push(format!("{unmatched_readings} readings matched no target"));
    }

    let mut additions = AdditionSet::default();
    let column = ColumnAddition { owner: spec.target.clone(), name: spec.attribute_name.clone(), value_type };
    match spec.pattern {
        Pattern::EventAttribute => {
            additions.new_event_attribute_columns.push(column);
            additions.event_attribute_writes.extend(values.iter().map(|v| EventAttributeWrite {
                event_id: v.target_id.clone(),
                name: spec.attribute_name.clone(),
                value: v.value.clone(),
            }));
        }
        Pattern::ObjectAttribute => {
            additions.new_object_attribute_columns.push(column);
            additions.object_attribute_rows.extend(values.iter().map(|v| ObjectAttributeRow {
                object_id: v.target_id.clone(),
                name: spec.attribute_name.clone(),
                value: v.value.clone(),
                time: v.time,
            }));
        }
    }

    let mut devices = Vec::new();
    if spec.materialize_devices && !contributing.is_empty() {
        devices = materialize(spec, log, &contributing, &mut additions)?;
    }

    Ok(Computation {
        digest,
        selected: selected.len(),
        matches,
        value_type,
        values,
        devices,
        additions,
        warnings,
    })
}

/// Adds device objects and their relations; returns the new device ids.
fn materialize(
    spec: &IntegrationSpec,
    log: &OcelLog,
    contributing: &BTreeMap<&str, Vec<&NormalizedReading>>,
    additions: &mut AdditionSet,
) -> Result<Vec<String>> {
    let objects = log.object_index();
    let mut descriptors: BTreeMap<&str, &DeviceDescriptor> = BTreeMap::new();
    for r in contributing.values().flatten() {
        descriptors.entry(r.device.device_id.as_str()).or_insert(&r.device);
    }
    let mut fresh = Vec::new();
    for (id, d) in &descriptors {
        match objects.get(id) {
            Some(o) if o.object_type == spec.device_type => {}
            Some(o) => {
                return Err(IntegrationError::spec(
                    "device_type",
                    format!("device {id:?} collides with an existing {:?} object", o.object_type),
                ))
            }
            None => fresh.push((*id, *d)),
        }
    }

    let existing = log.object_type(&spec.device_type);
    if existing.is_none() {
        additions.new_object_types.push(spec.device_type.clone());
    }
    for name in DEVICE_ATTRIBUTES {
        if existing.and_then(|t| t.attribute(name)).is_none() {
            additions.new_object_attribute_columns.push(ColumnAddition {
                owner: spec.device_type.clone(),
                name: name.to_string(),
                value_type: ValueType::Text,
            });
        }
    }
    for (id, d) in &fresh {
        let text = |v: Option<&String>| v.map_or(AttrValue::Null, |s| AttrValue::Text(s.clone()));
        let values = BTreeMap::from([
            ("device_kind".to_string(), AttrValue::Text(d.device_kind.as_str().to_string())),
            ("platform".to_string(), text(d.platform.as_ref())),
            ("deployment".to_string(), text(d.deployment.as_ref())),
        ]);
        additions.new_objects.push(OcelObject {
            id: id.to_string(),
            object_type: spec.device_type.clone(),
            states: vec![ObjectState { time: Timestamp::EPOCH, changed_field: None, values }],
        });
    }

    match spec.pattern {
        Pattern::EventAttribute => {
            let have: BTreeSet<&E2ORelation> = log.e2o.iter().collect();
            let mut new = BTreeSet::new();
            for (event, rs) in contributing {
                for r in rs {
                    let rel = E2ORelation {
                        event_id: event.to_string(),
                        object_id: r.device.device_id.clone(),
                        qualifier: spec.qualifier.clone(),
                    };
                    if !have.contains(&rel) {
                        new.insert(rel);
                    }
                }
            }
            additions.new_e2o.extend(new);
        }
        Pattern::ObjectAttribute => {
            let have: BTreeSet<&O2ORelation> = log.o2o.iter().collect();
            let mut new = BTreeSet::new();
            for (object, rs) in contributing {
                for r in rs {
                    let rel = O2ORelation {
                        source_id: r.device.device_id.clone(),
                        target_id: object.to_string(),
                        qualifier: spec.qualifier.clone(),
                    };
                    if !have.contains(&rel) {
                        new.insert(rel);
                    }
                }
            }
            additions.new_o2o.extend(new);
        }
    }
    Ok(fresh.into_iter().map(|(id, _)| id.to_string()).collect())
}

/// Dry run with the default preview size.
pub fn plan(spec: &IntegrationSpec, log: &OcelLog, readings: &[NormalizedReading]) -> Result<EnrichmentPlan> {
    plan_with_limit(spec, log, readings, DEFAULT_PREVIEW_LIMIT)
}

/// Computes what `spec` would write without touching any store.
pub fn plan_with_limit(
    spec: &IntegrationSpec,
    log: &OcelLog,
    readings: &[NormalizedReading],
    preview_limit: usize,
) -> Result<EnrichmentPlan> {
    let c = compute(spec, log, readings)?;
    let unmatched_reading_count = c.selected - c.matches.matched_readings().len();
    Ok(EnrichmentPlan {
        plan_id: c.digest[..16].to_string(),
        spec: spec.clone(),
        input_digest: c.digest.clone(),
        selected_readings: c.selected,
        value_type: c.value_type,
        match_groups: c
            .matches
            .groups
            .iter()
            .map(|(t, g)| MatchGroup { target_id: t.clone(), reading_count: g.len() })
            .collect(),
        unmatched_target_count: c.matches.unmatched_targets(),
        unmatched_reading_count,
        total_values: c.values.len(),
        preview: c.values.into_iter().take(preview_limit).collect(),
        devices_to_materialize: c.devices,
        expected: c.additions.receipt(),
        warnings: c.warnings,
    })
}

/// Recomputes a plan against the current inputs and returns the additions to
/// apply.
///
/// The spec is re-validated first, so a plan executed twice fails with
/// [`IntegrationError::AttributeCollision`]. Changed inputs fail with
/// [`IntegrationError::PlanInvalidated`].
pub fn execute(
    plan: &EnrichmentPlan,
    log: &OcelLog,
    readings: &[NormalizedReading],
) -> Result<(AdditionSet, EnrichmentReport)> {
    plan.spec.validate_against(log)?;
    let selected = select_readings(&plan.spec, readings);
    let actual = input_digest(&plan.spec, log, &selected);
    if actual != plan.input_digest {
        return Err(IntegrationError::PlanInvalidated { expected: plan.input_digest.clone(), actual });
    }
    let c = compute(&plan.spec, log, &selected)?;
    let report = EnrichmentReport::new(&plan.plan_id, &c.additions.receipt(), c.warnings);
    Ok((c.additions, report))
}

