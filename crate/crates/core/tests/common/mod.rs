//! Fixture generators and brute-force oracles shared by the integration
//! tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ocelink_core::integrate::{
    AggFn, CorrelationMode, CorrelationRule, IntegrationSpec, Manipulation, Pattern, Target, ValueRange,
};
use ocelink_core::iot::{DeviceDescriptor, DeviceKind, PropertyDescriptor, ValueKind};
use ocelink_core::ocel::{
    AttributeDecl, E2ORelation, O2ORelation, ObjectState, OcelEvent, OcelLog, OcelObject, TypeSchema, ValueType,
};
use ocelink_core::{AttrValue, NormalizedReading, ReadingValue, Timestamp};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ACTIVITIES: [&str; 4] = ["Load", "Check", "Ship", "Scan"];
pub const OBJECT_TYPES: [&str; 3] = ["Order", "Item", "Vehicle"];
pub const DEVICE_TYPES: [&str; 2] = ["d0", "d1"];
pub const BASE_MS: i64 = 1_709_251_200_000;
const HOUR: i64 = 3_600_000;

fn schema(name: &str, suffix: String, attrs: &[(&str, ValueType)]) -> TypeSchema {
    TypeSchema {
        name: name.into(),
        table_suffix: suffix,
        attributes: attrs.iter().map(|(n, t)| AttributeDecl::new(*n, *t)).collect(),
    }
}

/// A valid log with up to `max_events` events over a three-day range.
pub fn random_log(rng: &mut ChaCha8Rng, max_events: usize) -> OcelLog {
    let event_types = ACTIVITIES
        .iter()
        .enumerate()
        .map(|(i, a)| schema(a, format!("A{i}"), &[("station", ValueType::Text), ("count", ValueType::Integer)]))
        .collect();
    let object_types = OBJECT_TYPES
        .iter()
        .map(|t| schema(t, t.to_string(), &[("weight", ValueType::Float), ("label", ValueType::Text)]))
        .collect();
    let n_objects = rng.gen_range(3..=40);
    let mut objects = Vec::new();
    for i in 0..n_objects {
        let mut states = vec![ObjectState {
            time: Timestamp::from_millis(BASE_MS),
            changed_field: None,
            values: BTreeMap::from([
                ("weight".to_string(), AttrValue::Float(rng.gen_range(-50.0..50.0))),
                ("label".to_string(), if rng.gen_bool(0.2) { AttrValue::Null } else { AttrValue::Text(format!("L{i}")) }),
            ]),
        }];
        for k in 0..rng.gen_range(0..3) {
            states.push(ObjectState {
                time: Timestamp::from_millis(BASE_MS + (k + 1) * HOUR),
                changed_field: Some("weight".into()),
                values: BTreeMap::from([("weight".to_string(), AttrValue::Float(rng.gen_range(0.0..10.0)))]),
            });
        }
        objects.push(OcelObject { id: format!("o{i}"), object_type: OBJECT_TYPES.choose(rng).unwrap().to_string(), states });
    }
    let n_events = rng.gen_range(1..=max_events.max(1));
    let mut events = Vec::new();
    let mut e2o = Vec::new();
    for i in 0..n_events {
        let id = format!("e{i}");
        let mut attributes = BTreeMap::new();
        if rng.gen_bool(0.8) {
            attributes.insert("station".into(), AttrValue::Text(format!("s{}", rng.gen_range(0..4))));
        }
        attributes.insert("count".into(), AttrValue::Integer(rng.gen_range(-5..100)));
        events.push(OcelEvent {
            id: id.clone(),
            activity: ACTIVITIES.choose(rng).unwrap().to_string(),
            time: Timestamp::from_millis(BASE_MS + rng.gen_range(0..72 * HOUR) / 1000 * 1000),
            attributes,
        });
        let mut linked = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=3) {
            linked.insert(rng.gen_range(0..n_objects));
        }
        for o in linked {
            let q = ["in", "out", "uses"].choose(rng).unwrap();
            e2o.push(E2ORelation { event_id: id.clone(), object_id: format!("o{o}"), qualifier: q.to_string() });
        }
    }
    let mut o2o = BTreeSet::new();
    for _ in 0..rng.gen_range(0..n_objects) {
        let (a, b) = (rng.gen_range(0..n_objects), rng.gen_range(0..n_objects));
        if a != b {
            o2o.insert(O2ORelation { source_id: format!("o{a}"), target_id: format!("o{b}"), qualifier: "part-of".into() });
        }
    }
    OcelLog { event_types, object_types, events, objects, e2o, o2o: o2o.into_iter().collect(), extra_tables: Vec::new() }
}

/// Value `m * 2^e` with `|m| < 2^30` and `e` in `[-30, 10]`: exactly
/// representable, with an exact sum in `i128` units of `2^-30`.
pub fn dyadic(rng: &mut ChaCha8Rng) -> (f64, i128) {
    let m: i64 = rng.gen_range(-(1 << 30)..(1 << 30));
    let e: i32 = rng.gen_range(-30..=10);
    (m as f64 * 2f64.powi(e), (m as i128) << (e + 30))
}

pub fn reading(device: &str, device_type: &str, value: f64, time_ms: i64, object_ref: Option<String>, event_ref: Option<String>) -> NormalizedReading {
    NormalizedReading {
        device: DeviceDescriptor {
            device_id: device.into(),
            device_type: device_type.into(),
            device_kind: DeviceKind::Sensor,
            platform: None,
            deployment: None,
        },
        property: PropertyDescriptor { name: "level".into(), unit: Some("u".into()), value_type: ValueKind::Numeric },
        result: ReadingValue::Numeric(value),
        result_time: Timestamp::from_millis(time_ms),
        location: None,
        source_row: 0,
        object_ref,
        event_ref,
    }
}

/// Readings with times near events, and references that are valid,
/// dangling or absent.
pub fn random_readings(rng: &mut ChaCha8Rng, log: &OcelLog, n: usize) -> Vec<NormalizedReading> {
    (0..n)
        .map(|i| {
            let ty = DEVICE_TYPES.choose(rng).unwrap();
            let device = format!("{ty}-{}", rng.gen_range(0..4));
            let anchor = log.events.choose(rng).map(|e| e.time.millis()).unwrap_or(BASE_MS);
            let time = anchor + rng.gen_range(-2 * HOUR..=2 * HOUR) / 1000 * 1000;
            let pick = |rng: &mut ChaCha8Rng, ids: Vec<&String>| match rng.gen_range(0..10) {
                0 => Some("dangling".to_string()),
                1 | 2 => None,
                _ => ids.choose(rng).map(|s| s.to_string()),
            };
            let object_ref = pick(rng, log.objects.iter().map(|o| &o.id).collect());
            let event_ref = pick(rng, log.events.iter().map(|e| &e.id).collect());
            let mut r = reading(&device, ty, dyadic(rng).0, time, object_ref, event_ref);
            r.source_row = i;
            r
        })
        .collect()
}

pub fn random_rule(rng: &mut ChaCha8Rng) -> CorrelationRule {
    let mode = [
        CorrelationMode::ExplicitEventKey,
        CorrelationMode::ExplicitObjectKey,
        CorrelationMode::TimeWindow,
        CorrelationMode::LifecycleSpan,
    ]
    .choose(rng)
    .copied()
    .unwrap();
    CorrelationRule {
        mode,
        window_before_ms: rng.gen_range(0..=HOUR),
        window_after_ms: rng.gen_range(0..=HOUR),
        object_type_scope: rng.gen_bool(0.3).then(|| OBJECT_TYPES.choose(rng).unwrap().to_string()),
    }
}

pub fn manipulations() -> Vec<Manipulation> {
    vec![
        Manipulation::raw(),
        Manipulation::aggregate(AggFn::Min),
        Manipulation::aggregate(AggFn::Max),
        Manipulation::aggregate(AggFn::Average),
        Manipulation::aggregate(AggFn::Median),
        Manipulation::filter_then_aggregate(ValueRange::new(Some(-1e6), Some(1e8)), AggFn::Average),
    ]
}

pub fn random_spec(rng: &mut ChaCha8Rng, k: usize) -> IntegrationSpec {
    let pattern = if rng.gen_bool(0.5) { Pattern::EventAttribute } else { Pattern::ObjectAttribute };
    let target = match pattern {
        Pattern::EventAttribute => ACTIVITIES.choose(rng).unwrap(),
        Pattern::ObjectAttribute => OBJECT_TYPES.choose(rng).unwrap(),
    };
    IntegrationSpec {
        device_type: DEVICE_TYPES.choose(rng).unwrap().to_string(),
        property: None,
        pattern,
        target: target.to_string(),
        attribute_name: format!("enriched_{k}"),
        correlation: random_rule(rng),
        manipulation: manipulations().choose(rng).unwrap().clone(),
        qualifier: "observed-by".into(),
        materialize_devices: rng.gen_bool(0.7),
    }
}

/// Reference matcher: evaluates every (target, reading) pair directly from
/// the relation lists.
pub fn brute_force(
    readings: &[NormalizedReading],
    log: &OcelLog,
    rule: &CorrelationRule,
    target: &Target,
) -> BTreeMap<String, Vec<usize>> {
    let event_time = |id: &str| log.events.iter().find(|e| e.id == id).map(|e| e.time.millis());
    let object_type = |id: &str| log.objects.iter().find(|o| o.id == id).map(|o| o.object_type.clone());
    let in_scope = |o: &str| rule.object_type_scope.as_ref().is_none_or(|s| object_type(o).as_ref() == Some(s));
    let span = |o: &str| {
        let times: Vec<i64> = log.e2o.iter().filter(|r| r.object_id == o).filter_map(|r| event_time(&r.event_id)).collect();
        Some((*times.iter().min()?, *times.iter().max()?))
    };
    let linked = |e: &str, o: &str| log.e2o.iter().any(|r| r.event_id == e && r.object_id == o);
    let within = |t: i64, anchor: i64| anchor - rule.window_before_ms <= t && t <= anchor + rule.window_after_ms;

    let candidates: Vec<String> = match target {
        Target::Activity(a) => log.events.iter().filter(|e| &e.activity == a).map(|e| e.id.clone()).collect(),
        Target::ObjectType(t) => log.objects.iter().filter(|o| &o.object_type == t).map(|o| o.id.clone()).collect(),
    };
    let spans: BTreeMap<String, Option<(i64, i64)>> = log.objects.iter().map(|o| (o.id.clone(), span(&o.id))).collect();
    let mut out = BTreeMap::new();
    for c in &candidates {
        let mut hits = Vec::new();
        for (i, r) in readings.iter().enumerate() {
            let t = r.result_time.millis();
            let hit = match (rule.mode, target) {
                (CorrelationMode::ExplicitEventKey, Target::Activity(_)) => r.event_ref.as_ref() == Some(c),
                (CorrelationMode::ExplicitEventKey, Target::ObjectType(_)) => {
                    r.event_ref.as_ref().is_some_and(|e| linked(e, c))
                }
                (CorrelationMode::ExplicitObjectKey, Target::Activity(_)) => {
                    r.object_ref.as_ref().is_some_and(|o| in_scope(o) && linked(c, o))
                }
                (CorrelationMode::ExplicitObjectKey, Target::ObjectType(_)) => r.object_ref.as_ref() == Some(c),
                (CorrelationMode::TimeWindow, Target::Activity(_)) => within(t, event_time(c).unwrap()),
                (CorrelationMode::TimeWindow, Target::ObjectType(_)) => log
                    .e2o
                    .iter()
                    .filter(|rel| &rel.object_id == c)
                    .any(|rel| event_time(&rel.event_id).is_some_and(|et| within(t, et))),
                (CorrelationMode::LifecycleSpan, Target::ObjectType(_)) => {
                    spans[c].is_some_and(|(lo, hi)| lo <= t && t <= hi)
                }
                (CorrelationMode::LifecycleSpan, Target::Activity(_)) => log
                    .e2o
                    .iter()
                    .filter(|rel| &rel.event_id == c && in_scope(&rel.object_id))
                    .any(|rel| spans[&rel.object_id].is_some_and(|(lo, hi)| lo <= t && t <= hi)),
            };
            if hit {
                hits.push(i);
            }
        }
        if !hits.is_empty() {
            out.insert(c.clone(), hits);
        }
    }
    out
}

/// Every table's rows rendered and sorted, keyed by table name.
pub fn snapshot(path: &Path) -> BTreeMap<String, (Vec<String>, Vec<Vec<String>>)> {
    let conn = rusqlite::Connection::open(path).unwrap();
    let tables: Vec<String> = conn
        .prepare("SELECT name FROM sqlite_master WHERE type='table' ORDER BY name")
        .unwrap()
        .query_map([], |r| r.get(0))
        .unwrap()
        .map(Result::unwrap)
        .collect();
    tables
        .into_iter()
        .map(|t| {
            let cols: Vec<String> = conn
                .prepare(&format!("PRAGMA table_info(\"{t}\")"))
                .unwrap()
                .query_map([], |r| r.get(1))
                .unwrap()
                .map(Result::unwrap)
                .collect();
            let rows = project(&conn, &t, &cols);
            (t, (cols, rows))
        })
        .collect()
}

/// Sorted rows of `table` restricted to `cols`.
pub fn project(conn: &rusqlite::Connection, table: &str, cols: &[String]) -> Vec<Vec<String>> {
    let list: Vec<String> = cols.iter().map(|c| format!("\"{c}\"")).collect();
    let mut stmt = conn.prepare(&format!("SELECT {} FROM \"{table}\"", list.join(", "))).unwrap();
    let mut rows: Vec<Vec<String>> = stmt
        .query_map([], |r| {
            (0..cols.len()).map(|i| r.get::<_, rusqlite::types::Value>(i).map(|v| format!("{v:?}"))).collect()
        })
        .unwrap()
        .map(Result::unwrap)
        .collect();
    rows.sort();
    rows
}

/// True when every row of `before` survives in the store at `path`, with
/// unchanged cells in the original columns.
pub fn preserved(before: &BTreeMap<String, (Vec<String>, Vec<Vec<String>>)>, path: &Path) -> Result<(), String> {
    let conn = rusqlite::Connection::open(path).unwrap();
    for (table, (cols, rows)) in before {
        let mut after = project(&conn, table, cols);
        for row in rows {
            match after.binary_search(row) {
                Ok(i) => {
                    after.remove(i);
                }
                Err(_) => return Err(format!("row {row:?} of {table} changed or vanished")),
            }
        }
        let event_rows = table == "event" || (table.starts_with("event_") && !["event_object", "event_map_type"].contains(&table.as_str()));
        if event_rows && !after.is_empty() {
            return Err(format!("{table} gained rows"));
        }
    }
    Ok(())
}

/// A raw IoT table with synonym headers and roughly a fifth of its cells
/// damaged: blanks, unparseable numbers and times, bad or conflicting
/// device kinds, short rows.
pub fn random_corrupted_table(rng: &mut ChaCha8Rng, rows: usize) -> ocelink_core::Table {
    let id_col = *["device_id", "sensor_id", "Device ID"].choose(rng).unwrap();
    let value_col = *["value", "reading", "result"].choose(rng).unwrap();
    let time_col = *["timestamp", "time", "observed_at"].choose(rng).unwrap();
    let mut headers = vec![id_col, "property", value_col, time_col];
    let extras = ["device_type", "device_kind", "unit", "location", "platform", "deployment"];
    for e in extras {
        if rng.gen_bool(0.5) {
            headers.push(e);
        }
    }
    headers.shuffle(rng);
    let mut out = Vec::new();
    for _ in 0..rows {
        let device = rng.gen_range(0..5);
        let mut row: Vec<String> = headers
            .iter()
            .map(|h| match *h {
                "property" => ["temp", "speed"].choose(rng).unwrap().to_string(),
                "device_type" => format!("t{}", device % 2),
                "device_kind" => if device == 4 { "actuator".into() } else { "sensor".into() },
                "unit" => "u".into(),
                "location" | "platform" | "deployment" => format!("{h}-{}", rng.gen_range(0..3)),
                h if h == value_col => format!("{:.3}", rng.gen_range(-100.0..100.0)),
                h if h == time_col => Timestamp::from_millis(BASE_MS + rng.gen_range(0..HOUR)).to_string(),
                _ => format!("dev-{device}"),
            })
            .collect();
        if rng.gen_bool(0.2) {
            let i = rng.gen_range(0..row.len());
            row[i] = match rng.gen_range(0..5) {
                0 => String::new(),
                1 => "n/a".into(),
                2 => "31/31/2024".into(),
                3 => "robot".into(),
                _ => "actuator".into(),
            };
        }
        if rng.gen_bool(0.03) {
            row.truncate(rng.gen_range(0..row.len()));
        }
        out.push(row);
    }
    ocelink_core::Table::new(headers.into_iter().map(String::from).collect(), out)
}
