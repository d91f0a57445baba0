//! Deterministic port cargo-pickup scenario.
//!
//! Trucks enter the port gate under a pickup plan, are weighed empty, load
//! cargo from a silo, are weighed loaded and leave. Every truck carries a
//! GPS tracker; two weighbridges record gross weights. The generator emits
//! an OCEL log, two raw IoT tables (one with epoch-millisecond timestamps),
//! a few corrupted rows and a [`GroundTruth`] describing all of it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::iot::{ColumnMapping, Role, Table};
use crate::ocel::{
    mapped_type_name, write_ocel, AttrValue, AttributeDecl, DfgEdge, E2ORelation, O2ORelation, ObjectState,
    OcelError, OcelEvent, OcelLog, OcelObject, OcelStats, TypeSchema, ValueType,
};
use crate::time::Timestamp;

pub const GPS_FILE: &str = "gps.csv";
pub const WEIGHT_FILE: &str = "weight.csv";
pub const OCEL_FILE: &str = "ocel.sqlite";
pub const TRUTH_FILE: &str = "ground_truth.json";

/// Relative deviation between declared and measured cargo weight above
/// which a truck counts as anomalous.
pub const ANOMALY_THRESHOLD: f64 = 0.1;

const SILOS: [(&str, i64); 3] = [("silo-1", 500), ("silo-2", 750), ("silo-3", 1000)];
const STATIONS: [&str; 2] = ["wb-1", "wb-2"];
const SAMPLES_PER_WEIGHING: usize = 3;
const ACTIVITIES: [&str; 5] = ["Enter Gate", "Weigh Empty", "Load Cargo", "Weigh Loaded", "Exit Gate"];

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Ocel(#[from] OcelError),
    #[error(transparent)]
    Iot(#[from] crate::iot::IotError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub seed: u64,
    pub trucks: usize,
    /// Share of clean IoT rows that get a corrupted copy.
    pub corruption_rate: f64,
    /// Share of trucks whose loaded weight deviates from the declaration.
    pub anomaly_rate: f64,
    pub gps_interval_s: i64,
    pub start: Timestamp,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            seed: 42,
            trucks: 20,
            corruption_rate: 0.02,
            anomaly_rate: 0.1,
            gps_interval_s: 30,
            start: Timestamp::parse("2024-03-01T06:00:00Z").expect("valid literal"),
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.trucks == 0 {
            return Err(ScenarioError::Param("trucks must be at least 1".into()));
        }
        for (name, v) in [("corruption_rate", self.corruption_rate), ("anomaly_rate", self.anomaly_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ScenarioError::Param(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.gps_interval_s <= 0 {
            return Err(ScenarioError::Param("gps_interval_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckTruth {
    pub truck_id: String,
    pub cargo_id: String,
    pub plan_id: String,
    pub silo_id: String,
    pub gps_device: String,
    pub weigh_empty_event: String,
    pub weigh_loaded_event: String,
    pub declared_weight_kg: f64,
    /// Mean of the samples taken at the empty weighing.
    pub empty_weight_kg: f64,
    pub loaded_weight_kg: f64,
    pub max_speed_kmh: f64,
    pub anomalous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptedRow {
    pub file: String,
    /// Zero-based data row in the written file.
    pub source_row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedDeviceType {
    pub device_type: String,
    pub record_count: usize,
    pub device_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub params: ScenarioParams,
    pub stats: OcelStats,
    pub trucks: Vec<TruckTruth>,
    pub anomalous_trucks: Vec<String>,
    pub corrupted_rows: Vec<CorruptedRow>,
    /// Clean data rows per IoT file.
    pub clean_rows: BTreeMap<String, usize>,
    pub dfg: BTreeMap<String, Vec<DfgEdge>>,
    pub device_summary: Vec<ExpectedDeviceType>,
    pub expected_mappings: BTreeMap<String, ColumnMapping>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub log: OcelLog,
    pub gps: Table,
    pub weights: Table,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFiles {
    pub ocel: PathBuf,
    pub gps: PathBuf,
    pub weights: PathBuf,
    pub truth: PathBuf,
}

/// Weights sit on a 0.5 kg grid so sample sums and means are exact.
fn round_half(x: f64) -> f64 {
    (x * 2.0).round() / 2.0
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn schema(name: &str, attrs: &[(&str, ValueType)], taken: &mut Vec<String>) -> TypeSchema {
    let suffix = mapped_type_name(name, taken.iter().map(String::as_str));
    taken.push(suffix.clone());
    TypeSchema {
        name: name.to_string(),
        table_suffix: suffix,
        attributes: attrs.iter().map(|(n, t)| AttributeDecl::new(*n, *t)).collect(),
    }
}

fn object(id: String, ty: &str, time: Timestamp, values: Vec<(&str, AttrValue)>) -> OcelObject {
    OcelObject {
        id,
        object_type: ty.to_string(),
        states: vec![ObjectState {
            time,
            changed_field: None,
            values: values.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }],
    }
}

fn mapping(pairs: &[(Role, &str)]) -> ColumnMapping {
    ColumnMapping { columns: pairs.iter().map(|(r, c)| (*r, c.to_string())).collect(), ..Default::default() }
}

fn self_loop(ty: &str, activity: &str, frequency: u64) -> Vec<DfgEdge> {
    if frequency == 0 {
        return Vec::new();
    }
    vec![DfgEdge { object_type: ty.into(), from_activity: activity.into(), to_activity: activity.into(), frequency }]
}

/// Builds the scenario; identical parameters give identical output.
pub fn generate(params: &ScenarioParams) -> Result<Scenario, ScenarioError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.trucks;
    let plan_count = n.div_ceil(4);
    let start = params.start;

    let mut taken = Vec::new();
    let event_types = vec![
        schema("Enter Gate", &[("gate", ValueType::Text)], &mut taken),
        schema("Weigh Empty", &[("station", ValueType::Text)], &mut taken),
        schema("Load Cargo", &[("dock", ValueType::Integer)], &mut taken),
        schema("Weigh Loaded", &[("station", ValueType::Text)], &mut taken),
        schema("Exit Gate", &[("gate", ValueType::Text)], &mut taken),
    ];
    let mut taken = Vec::new();
    let object_types = vec![
        schema(
            "Truck",
            &[("license_plate", ValueType::Text), ("axle_count", ValueType::Integer), ("refrigerated", ValueType::Boolean)],
            &mut taken,
        ),
        schema("Cargo", &[("declared_weight_kg", ValueType::Float)], &mut taken),
        schema("Silo", &[("capacity_t", ValueType::Integer)], &mut taken),
        schema("PickupPlan", &[("planned_date", ValueType::Time)], &mut taken),
    ];

    let mut objects = Vec::new();
    for (id, cap) in SILOS {
        objects.push(object(id.into(), "Silo", start, vec![("capacity_t", AttrValue::Integer(cap))]));
    }
    let plan_ids: Vec<String> = (1..=plan_count).map(|i| format!("plan-{i:02}")).collect();
    for (i, id) in plan_ids.iter().enumerate() {
        let planned = start.plus_millis(i as i64 * 3_600_000);
        objects.push(object(id.clone(), "PickupPlan", start, vec![("planned_date", AttrValue::Time(planned))]));
    }

    let anomalous_count = (params.anomaly_rate * n as f64).round() as usize;
    let mut anomalous: BTreeSet<usize> = BTreeSet::new();
    while anomalous.len() < anomalous_count {
        anomalous.insert(rng.gen_range(0..n));
    }

    let mut events = Vec::new();
    let mut e2o = Vec::new();
    let mut o2o = Vec::new();
    let mut gps_rows = Vec::new();
    let mut weight_rows = Vec::new();
    let mut trucks = Vec::new();
    let mut silo_loads: BTreeMap<&str, usize> = BTreeMap::new();
    let mut plan_entries: BTreeMap<&str, usize> = BTreeMap::new();
    let mut stations_used = BTreeSet::new();
    let mut arrival = start;
    let minute = 60_000;

    for i in 0..n {
        let truck_id = format!("truck-{:03}", i + 1);
        let cargo_id = format!("cargo-{:03}", i + 1);
        let plan_id = &plan_ids[i % plan_count];
        let (silo_id, _) = SILOS[rng.gen_range(0..SILOS.len())];
        let gps_device = format!("gps-{truck_id}");
        *silo_loads.entry(silo_id).or_default() += 1;
        *plan_entries.entry(plan_id.as_str()).or_default() += 1;

        let plate = format!("PT-{:04}", rng.gen_range(0..10_000));
        objects.push(object(truck_id.clone(), "Truck", start, vec![
            ("license_plate", AttrValue::Text(plate)),
            ("axle_count", AttrValue::Integer(rng.gen_range(3..=5))),
            ("refrigerated", AttrValue::Boolean(rng.gen_bool(0.3))),
        ]));
        let declared = (rng.gen_range(800..=2400) * 10) as f64;
        objects.push(object(cargo_id.clone(), "Cargo", start, vec![("declared_weight_kg", AttrValue::Float(declared))]));

        if i > 0 {
            arrival = arrival.plus_millis(rng.gen_range(6..=14) * minute);
        }
        let t_enter = arrival;
        let t_empty = t_enter.plus_millis(rng.gen_range(3..=6) * minute);
        let t_load = t_empty.plus_millis(rng.gen_range(5..=10) * minute);
        let t_loaded = t_load.plus_millis(rng.gen_range(20..=40) * minute);
        let t_exit = t_loaded.plus_millis(rng.gen_range(3..=6) * minute);
        let gate = if rng.gen_bool(0.5) { "G1" } else { "G2" };
        let station_empty = STATIONS[rng.gen_range(0..2)];
        let station_loaded = STATIONS[rng.gen_range(0..2)];
        stations_used.insert(station_empty);
        stations_used.insert(station_loaded);

        let base = events.len();
        let ev = |k: usize| format!("e-{:06}", base + k + 1);
        let attrs = [
            ("gate", AttrValue::Text(gate.into())),
            ("station", AttrValue::Text(station_empty.into())),
            ("dock", AttrValue::Integer(rng.gen_range(1..=8))),
            ("station", AttrValue::Text(station_loaded.into())),
            ("gate", AttrValue::Text(gate.into())),
        ];
        for (k, ((activity, time), (attr, value))) in
            ACTIVITIES.iter().zip([t_enter, t_empty, t_load, t_loaded, t_exit]).zip(attrs).enumerate()
        {
            events.push(OcelEvent {
                id: ev(k),
                activity: activity.to_string(),
                time,
                attributes: BTreeMap::from([(attr.to_string(), value)]),
            });
        }
        let rel = |k: usize, o: &str, q: &str| E2ORelation { event_id: ev(k), object_id: o.into(), qualifier: q.into() };
        e2o.extend([
            rel(0, &truck_id, "truck"),
            rel(0, plan_id, "plan"),
            rel(1, &truck_id, "weighed"),
            rel(2, &truck_id, "truck"),
            rel(2, &cargo_id, "cargo"),
            rel(2, silo_id, "source"),
            rel(3, &truck_id, "weighed"),
            rel(3, &cargo_id, "cargo"),
            rel(4, &truck_id, "truck"),
        ]);
        let orel = |s: &str, t: &str, q: &str| O2ORelation { source_id: s.into(), target_id: t.into(), qualifier: q.into() };
        o2o.extend([
            orel(plan_id, &truck_id, "contains"),
            orel(&truck_id, &cargo_id, "carries"),
            orel(&cargo_id, silo_id, "stored-in"),
        ]);

        // Weighbridge samples: tare, then tare plus the actual cargo mass.
        let tare = round_half(rng.gen_range(9_000.0..14_000.0));
        let is_anomalous = anomalous.contains(&i);
        let deviation = if is_anomalous {
            let d = rng.gen_range(0.15..0.30);
            if rng.gen_bool(0.5) { d } else { -d }
        } else {
            rng.gen_range(-0.02..0.02)
        };
        let gross = round_half(tare + declared * (1.0 + deviation));
        let mut weigh = |event: String, station: &str, at: Timestamp, centre: f64| {
            let mut samples = Vec::new();
            for s in 0..SAMPLES_PER_WEIGHING {
                let v = centre + (s as f64 - 1.0) * 0.5;
                samples.push(v);
                weight_rows.push(vec![
                    station.to_string(),
                    "weighbridge".into(),
                    "gross_weight_kg".into(),
                    "kg".into(),
                    format!("{v:.1}"),
                    at.plus_millis(2_000 * (s as i64 + 1)).millis().to_string(),
                    "gate-east".into(),
                    truck_id.clone(),
                    event.clone(),
                ]);
            }
            samples.iter().sum::<f64>() / samples.len() as f64
        };
        let empty_weight = weigh(ev(1), station_empty, t_empty, tare);
        let loaded_weight = weigh(ev(3), station_loaded, t_loaded, gross);
        let measured = loaded_weight - empty_weight;

        let mut max_speed: f64 = 0.0;
        let mut t = t_enter;
        while t <= t_exit {
            let near = |x: Timestamp| (t.millis() - x.millis()).abs() <= 90_000;
            let speed = if near(t_empty) || near(t_loaded) || near(t_load) {
                rng.gen_range(0.0..3.0)
            } else if near(t_enter) || near(t_exit) {
                rng.gen_range(2.0..12.0)
            } else {
                rng.gen_range(8.0..30.0)
            };
            let speed = round1(speed);
            max_speed = max_speed.max(speed);
            gps_rows.push(vec![
                gps_device.clone(),
                "gps".into(),
                "sensor".into(),
                "speed_kmh".into(),
                "km/h".into(),
                format!("{speed:.1}"),
                t.to_string(),
                truck_id.clone(),
                "port-yard".into(),
                truck_id.clone(),
            ]);
            t = t.plus_millis(params.gps_interval_s * 1000);
        }

        trucks.push(TruckTruth {
            truck_id: truck_id.clone(),
            cargo_id,
            plan_id: plan_id.clone(),
            silo_id: silo_id.into(),
            gps_device,
            weigh_empty_event: ev(1),
            weigh_loaded_event: ev(3),
            declared_weight_kg: declared,
            empty_weight_kg: empty_weight,
            loaded_weight_kg: loaded_weight,
            max_speed_kmh: max_speed,
            anomalous: ((measured - declared) / declared).abs() > ANOMALY_THRESHOLD,
        });
    }

    let clean_rows = BTreeMap::from([(GPS_FILE.to_string(), gps_rows.len()), (WEIGHT_FILE.to_string(), weight_rows.len())]);
    let mut corrupted_rows = Vec::new();
    let gps_rows = corrupt(&mut rng, gps_rows, GPS_FILE, params.corruption_rate, (5, 6, 0), &mut corrupted_rows);
    let weight_rows = corrupt(&mut rng, weight_rows, WEIGHT_FILE, params.corruption_rate, (4, 5, 0), &mut corrupted_rows);

    let headers = |h: &[&str]| h.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let gps = Table::new(
        headers(&["device_id", "device_type", "device_kind", "property", "unit", "value", "timestamp", "platform", "location", "object_id"]),
        gps_rows,
    );
    let weights = Table::new(
        headers(&["device_id", "device_type", "property", "unit", "value", "timestamp", "deployment", "object_id", "event_id"]),
        weight_rows,
    );

    let mut per_activity_counts = BTreeMap::new();
    for a in ACTIVITIES {
        per_activity_counts.insert(a.to_string(), n);
    }
    let per_object_type_counts = BTreeMap::from([
        ("Truck".to_string(), n),
        ("Cargo".to_string(), n),
        ("Silo".to_string(), SILOS.len()),
        ("PickupPlan".to_string(), plan_count),
    ]);
    let stats = OcelStats {
        event_count: 5 * n,
        object_count: 2 * n + SILOS.len() + plan_count,
        activity_count: ACTIVITIES.len(),
        object_type_count: 4,
        e2o_count: 9 * n,
        o2o_count: 3 * n,
        per_activity_counts,
        per_object_type_counts,
    };

    let mut dfg = BTreeMap::new();
    let mut truck_edges: Vec<DfgEdge> = ACTIVITIES
        .windows(2)
        .map(|w| DfgEdge { object_type: "Truck".into(), from_activity: w[0].into(), to_activity: w[1].into(), frequency: n as u64 })
        .collect();
    truck_edges.sort_by(|a, b| (&a.from_activity, &a.to_activity).cmp(&(&b.from_activity, &b.to_activity)));
    dfg.insert("Truck".to_string(), truck_edges);
    dfg.insert(
        "Cargo".to_string(),
        vec![DfgEdge {
            object_type: "Cargo".into(),
            from_activity: "Load Cargo".into(),
            to_activity: "Weigh Loaded".into(),
            frequency: n as u64,
        }],
    );
    // A silo or plan only sees one activity, so its graph is a self-loop
    // counted once per consecutive pair of trucks.
    let chain = |counts: &BTreeMap<&str, usize>| counts.values().map(|c| c.saturating_sub(1) as u64).sum();
    dfg.insert("Silo".to_string(), self_loop("Silo", "Load Cargo", chain(&silo_loads)));
    dfg.insert("PickupPlan".to_string(), self_loop("PickupPlan", "Enter Gate", chain(&plan_entries)));

    let device_summary = vec![
        ExpectedDeviceType { device_type: "gps".into(), record_count: clean_rows[GPS_FILE], device_count: n },
        ExpectedDeviceType {
            device_type: "weighbridge".into(),
            record_count: clean_rows[WEIGHT_FILE],
            device_count: stations_used.len(),
        },
    ];
    let expected_mappings = BTreeMap::from([
        (
            GPS_FILE.to_string(),
            mapping(&[
                (Role::DeviceId, "device_id"),
                (Role::DeviceType, "device_type"),
                (Role::DeviceKind, "device_kind"),
                (Role::Property, "property"),
                (Role::Unit, "unit"),
                (Role::Result, "value"),
                (Role::ResultTime, "timestamp"),
                (Role::Platform, "platform"),
                (Role::Location, "location"),
                (Role::ObjectRef, "object_id"),
            ]),
        ),
        (
            WEIGHT_FILE.to_string(),
            mapping(&[
                (Role::DeviceId, "device_id"),
                (Role::DeviceType, "device_type"),
                (Role::Property, "property"),
                (Role::Unit, "unit"),
                (Role::Result, "value"),
                (Role::ResultTime, "timestamp"),
                (Role::Deployment, "deployment"),
                (Role::ObjectRef, "object_id"),
                (Role::EventRef, "event_id"),
            ]),
        ),
    ]);

    let anomalous_trucks = trucks.iter().filter(|t| t.anomalous).map(|t| t.truck_id.clone()).collect();
    let log = OcelLog { event_types, object_types, events, objects, e2o, o2o, extra_tables: Vec::new() };
    Ok(Scenario {
        log,
        gps,
        weights,
        truth: GroundTruth {
            params: params.clone(),
            stats,
            trucks,
            anomalous_trucks,
            corrupted_rows,
            clean_rows,
            dfg,
            device_summary,
            expected_mappings,
        },
    })
}

/// Inserts a corrupted copy after a sample of rows. `cols` names the value,
/// timestamp and device-id columns; reasons cycle in a fixed order.
fn corrupt(
    rng: &mut ChaCha8Rng,
    rows: Vec<Vec<String>>,
    file: &str,
    rate: f64,
    cols: (usize, usize, usize),
    out: &mut Vec<CorruptedRow>,
) -> Vec<Vec<String>> {
    let mut count = (rate * rows.len() as f64).round() as usize;
    if rate > 0.0 && !rows.is_empty() {
        count = count.max(1);
    }
    let mut picked = BTreeSet::new();
    while picked.len() < count.min(rows.len()) {
        picked.insert(rng.gen_range(0..rows.len()));
    }
    let mut result = Vec::with_capacity(rows.len() + picked.len());
    for (i, row) in rows.into_iter().enumerate() {
        let copy = picked.contains(&i).then(|| row.clone());
        result.push(row);
        if let Some(mut bad) = copy {
            let reason = match out.iter().filter(|c| c.file == file).count() % 3 {
                0 => {
                    bad[cols.0] = "n/a".into();
                    "unparseable-number"
                }
                1 => {
                    bad[cols.1] = "not-a-time".into();
                    "unparseable-timestamp"
                }
                _ => {
                    bad[cols.2] = String::new();
                    "missing-required-field"
                }
            };
            out.push(CorruptedRow { file: file.into(), source_row: result.len(), reason: reason.into() });
            result.push(bad);
        }
    }
    result
}

impl Scenario {
    /// Writes the four scenario files into `dir`, which must not already
    /// hold them.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<ScenarioFiles, ScenarioError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let files = ScenarioFiles {
            ocel: dir.join(OCEL_FILE),
            gps: dir.join(GPS_FILE),
            weights: dir.join(WEIGHT_FILE),
            truth: dir.join(TRUTH_FILE),
        };
        for p in [&files.gps, &files.weights, &files.truth] {
            if p.exists() {
                return Err(ScenarioError::Ocel(OcelError::AlreadyExists(p.clone())));
            }
        }
        write_ocel(&self.log, &files.ocel)?;
        self.gps.write_delimited(fs::File::create(&files.gps)?, b',')?;
        self.weights.write_delimited(fs::File::create(&files.weights)?, b',')?;
        fs::write(&files.truth, serde_json::to_vec_pretty(&self.truth)?)?;
        Ok(files)
    }
}
