use std::collections::BTreeMap;

use ocelink_core::integrate::{AggFn, CorrelationMode, CorrelationRule, IntegrationSpec, Manipulation, Pattern};
use ocelink_core::ocel::{load_ocel, ApplyOptions};
use ocelink_core::pipeline;
use ocelink_core::scenario::{generate, ScenarioParams, GPS_FILE, WEIGHT_FILE};
use ocelink_core::{AttrValue, Workspace};

fn spec(device: &str, pattern: Pattern, target: &str, attr: &str, mode: CorrelationMode, m: Manipulation) -> IntegrationSpec {
    IntegrationSpec {
        device_type: device.into(),
        property: None,
        pattern,
        target: target.into(),
        attribute_name: attr.into(),
        correlation: CorrelationRule::new(mode),
        manipulation: m,
        qualifier: "observed-by".into(),
        materialize_devices: true,
    }
}

#[test]
fn seed_42_matches_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate(&ScenarioParams::default()).unwrap();
    let files = scenario.write_to(dir.path().join("scenario")).unwrap();
    let truth = &scenario.truth;
    let ws = Workspace::init(dir.path().join("ws")).unwrap();

    let imported = pipeline::import_ocel(&ws, &std::fs::read(&files.ocel).unwrap(), "ocel.sqlite", false).unwrap();
    assert_eq!(imported.stats, truth.stats);
    assert!(imported.violations.is_empty());
    for (ty, edges) in &truth.dfg {
        assert_eq!(&pipeline::dfg(&ws, ty).unwrap(), edges, "dfg of {ty}");
    }

    for (file, path) in [(GPS_FILE, &files.gps), (WEIGHT_FILE, &files.weights)] {
        let staged = pipeline::stage(&ws, &std::fs::read(path).unwrap(), file).unwrap();
        let suggestion = pipeline::infer(&ws, &staged.hash).unwrap();
        assert_eq!(suggestion.mapping.columns, truth.expected_mappings[file].columns, "{file}");
        let out = pipeline::normalize_upload(&ws, &staged.hash, &suggestion.mapping).unwrap();
        assert_eq!(out.accepted, truth.clean_rows[file]);
        let mut got: Vec<(usize, &str)> = out.rejects.iter().map(|r| (r.source_row, r.reason.code())).collect();
        got.sort();
        let want: Vec<(usize, &str)> =
            truth.corrupted_rows.iter().filter(|c| c.file == file).map(|c| (c.source_row, c.reason.as_str())).collect();
        assert_eq!(got, want, "{file}");
    }
    let summary = pipeline::summary(&ws).unwrap();
    for d in &truth.device_summary {
        let s = summary.get(&d.device_type).unwrap();
        assert_eq!((s.record_count, s.device_count), (d.record_count, d.device_count));
    }

    let specs = [
        spec("weighbridge", Pattern::EventAttribute, "Weigh Empty", "gross_weight_kg", CorrelationMode::ExplicitEventKey, Manipulation::aggregate(AggFn::Average)),
        spec("weighbridge", Pattern::EventAttribute, "Weigh Loaded", "gross_weight_kg", CorrelationMode::ExplicitEventKey, Manipulation::aggregate(AggFn::Average)),
        spec("gps", Pattern::ObjectAttribute, "Truck", "max_speed_kmh", CorrelationMode::ExplicitObjectKey, Manipulation::aggregate(AggFn::Max)),
    ];
    for s in &specs {
        let plan = pipeline::plan(&ws, s, 5).unwrap();
        let out = pipeline::execute_plan(&ws, &plan.plan_id, &ApplyOptions::default()).unwrap();
        assert_eq!(out.report.attribute_writes, plan.total_values);
        assert_ne!(out.store_hash_before, out.store_hash_after);
    }

    let log = load_ocel(pipeline::ocel_path(&ws)).unwrap();
    for t in &truth.trucks {
        let get = |id: &str| log.event(id).unwrap().attributes.get("gross_weight_kg").and_then(AttrValue::as_f64).unwrap();
        assert_eq!(get(&t.weigh_empty_event), t.empty_weight_kg);
        assert_eq!(get(&t.weigh_loaded_event), t.loaded_weight_kg);
        let speeds = log.object(&t.truck_id).unwrap().attribute_values("max_speed_kmh");
        assert_eq!(speeds.len(), 1);
        assert_eq!(speeds[0].1.as_f64(), Some(t.max_speed_kmh));
        let anomalous = ((get(&t.weigh_loaded_event) - get(&t.weigh_empty_event)) - t.declared_weight_kg).abs()
            / t.declared_weight_kg
            > 0.1;
        assert_eq!(anomalous, truth.anomalous_trucks.contains(&t.truck_id));
    }
    let counts: BTreeMap<_, _> = log.objects.iter().fold(BTreeMap::new(), |mut m, o| {
        *m.entry(o.object_type.as_str()).or_insert(0) += 1;
        m
    });
    assert_eq!(counts["gps"], truth.params.trucks);
    assert_eq!(counts["weighbridge"], 2);

    // Executing the same plan again collides with the attribute it created.
    let again = pipeline::plan(&ws, &specs[0], 5).unwrap_err();
    assert_eq!(again.code(), "attribute_collision");
}
