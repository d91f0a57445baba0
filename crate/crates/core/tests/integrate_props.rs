mod common;

use common::*;
use ocelink_core::integrate::{
    aggregate, correlate, execute, filter_range, plan_with_limit, AggFn, CorrelationMode, CorrelationRule,
    IntegrationError, IntegrationSpec, Manipulation, Pattern, Target, ValueRange,
};
use ocelink_core::ocel::{apply_additions, load_ocel, write_ocel};
use ocelink_core::AttrValue;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn naive_median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    // insertion sort, independent of the library's sort
    for i in 1..s.len() {
        let mut j = i;
        while j > 0 && s[j - 1] > s[j] {
            s.swap(j - 1, j);
            j -= 1;
        }
    }
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn aggregation_matches_scan_oracle(seed in any::<u64>(), len in 1usize..=50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(f64, i128)> = (0..len).map(|_| dyadic(&mut rng)).collect();
        let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let exact_sum: i128 = pairs.iter().map(|p| p.1).sum();
        let mean = (exact_sum as f64) * 2f64.powi(-30) / len as f64;
        let min = values.iter().copied().fold(f64::INFINITY, |a, b| if b < a { b } else { a });
        let max = values.iter().copied().fold(f64::NEG_INFINITY, |a, b| if b > a { b } else { a });
        prop_assert_eq!(aggregate(&values, AggFn::Min).unwrap(), min);
        prop_assert_eq!(aggregate(&values, AggFn::Max).unwrap(), max);
        prop_assert_eq!(aggregate(&values, AggFn::Median).unwrap(), naive_median(&values));
        let avg = aggregate(&values, AggFn::Average).unwrap();
        let scale = values.iter().fold(0f64, |a, v| a.max(v.abs()));
        prop_assert!((avg - mean).abs() <= 1e-12 * mean.abs().max(scale * f64::EPSILON), "{avg} vs {mean}");
    }

    #[test]
    fn average_is_permutation_invariant(seed in any::<u64>(), len in 1usize..=50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..len).map(|_| dyadic(&mut rng).0).collect();
        let a = aggregate(&values, AggFn::Average).unwrap();
        values.reverse();
        prop_assert_eq!(a, aggregate(&values, AggFn::Average).unwrap());
    }

    #[test]
    fn filter_keeps_exactly_the_in_range_readings(seed in any::<u64>(), lo in -1e9f64..1e9, width in 0f64..1e9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = random_log(&mut rng, 20);
        let readings = random_readings(&mut rng, &log, 60);
        let range = ValueRange::new(Some(lo), Some(lo + width));
        let kept = filter_range(&readings, &range).unwrap();
        let expected: Vec<_> = readings.iter().filter(|r| {
            let v = r.result.as_f64().unwrap();
            lo <= v && v <= lo + width
        }).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn correlation_equals_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = random_log(&mut rng, 80);
        let readings = random_readings(&mut rng, &log, 200);
        let rule = random_rule(&mut rng);
        for target in ACTIVITIES.iter().map(|a| Target::Activity(a.to_string()))
            .chain(OBJECT_TYPES.iter().map(|t| Target::ObjectType(t.to_string())))
        {
            if !log.events.iter().any(|e| Target::Activity(e.activity.clone()) == target)
                && matches!(target, Target::Activity(_)) {
                continue;
            }
            if matches!(target, Target::ObjectType(_)) && !log.has_object_type(target.name()) {
                continue;
            }
            let got = correlate(&readings, &log, &rule, &target).unwrap();
            prop_assert_eq!(&got.groups, &brute_force(&readings, &log, &rule, &target), "{:?} {:?}", rule, target);
        }
    }
}

#[test]
fn explicit_mode_without_keys_is_a_correlation_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let log = random_log(&mut rng, 10);
    let mut readings = random_readings(&mut rng, &log, 5);
    for r in &mut readings {
        r.event_ref = None;
    }
    let rule = CorrelationRule::new(CorrelationMode::ExplicitEventKey);
    let err = correlate(&readings, &log, &rule, &Target::Activity("Load".into())).unwrap_err();
    assert!(matches!(err, IntegrationError::Correlation(_)));
    // No readings at all is not an error.
    assert!(correlate(&[], &log, &rule, &Target::Activity("Load".into())).unwrap().groups.is_empty());
}

#[test]
fn unknown_target_is_not_found() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let log = random_log(&mut rng, 10);
    let rule = CorrelationRule::window(0, 0);
    assert!(matches!(
        correlate(&[], &log, &rule, &Target::Activity("Nope".into())),
        Err(IntegrationError::NotFound { .. })
    ));
}

/// Plans with an unbounded preview, executes, applies, and compares every
/// previewed value with what the store holds afterwards.
fn differential(seed: u64, pattern: Pattern, mode: CorrelationMode, m: Manipulation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log = random_log(&mut rng, 60);
    let readings = random_readings(&mut rng, &log, 300);
    let target = match pattern {
        Pattern::EventAttribute => log.events[0].activity.clone(),
        Pattern::ObjectAttribute => log.objects[0].object_type.clone(),
    };
    let spec = IntegrationSpec {
        device_type: "d0".into(),
        property: None,
        pattern,
        target,
        attribute_name: "enriched".into(),
        correlation: CorrelationRule { mode, window_before_ms: 1_800_000, window_after_ms: 900_000, object_type_scope: None },
        manipulation: m,
        qualifier: "observed-by".into(),
        materialize_devices: true,
    };
    let plan = plan_with_limit(&spec, &log, &readings, usize::MAX).unwrap();
    assert_eq!(plan.preview.len(), plan.total_values);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.sqlite");
    write_ocel(&log, &path).unwrap();
    let (additions, report) = execute(&plan, &log, &readings).unwrap();
    let receipt = apply_additions(&path, &additions).unwrap();
    assert!(report.matches_receipt(&receipt));
    let after = load_ocel(&path).unwrap();
    match pattern {
        Pattern::EventAttribute => {
            for e in after.events.iter().filter(|e| e.activity == spec.target) {
                let expected = plan.preview.iter().find(|v| v.target_id == e.id).map(|v| v.value.clone());
                let stored = e.attributes.get("enriched").cloned().unwrap_or(AttrValue::Null);
                assert_eq!(stored, expected.unwrap_or(AttrValue::Null), "event {}", e.id);
            }
        }
        Pattern::ObjectAttribute => {
            for o in after.objects.iter().filter(|o| o.object_type == spec.target) {
                let mut expected: Vec<_> = plan.preview.iter().filter(|v| v.target_id == o.id).map(|v| (v.time, v.value.clone())).collect();
                let mut stored = o.attribute_values("enriched");
                expected.sort_by(|a, b| (a.0, format!("{:?}", a.1)).cmp(&(b.0, format!("{:?}", b.1))));
                stored.sort_by(|a, b| (a.0, format!("{:?}", a.1)).cmp(&(b.0, format!("{:?}", b.1))));
                assert_eq!(stored, expected, "object {}", o.id);
            }
        }
    }
}

#[test]
fn preview_equals_executed_values_across_the_matrix() {
    let mut seed = 100;
    for pattern in [Pattern::EventAttribute, Pattern::ObjectAttribute] {
        for mode in [
            CorrelationMode::ExplicitEventKey,
            CorrelationMode::ExplicitObjectKey,
            CorrelationMode::TimeWindow,
            CorrelationMode::LifecycleSpan,
        ] {
            for m in manipulations() {
                seed += 1;
                differential(seed, pattern, mode, m);
            }
        }
    }
}

#[test]
fn enrichment_never_touches_existing_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..25 {
        let log = random_log(&mut rng, 50);
        let readings = random_readings(&mut rng, &log, 150);
        let spec = random_spec(&mut rng, k);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.sqlite");
        write_ocel(&log, &path).unwrap();
        let before = snapshot(&path);
        let bytes = std::fs::read(&path).unwrap();
        match plan_with_limit(&spec, &log, &readings, 0).and_then(|p| execute(&p, &log, &readings)) {
            Ok((additions, _)) => {
                apply_additions(&path, &additions).unwrap();
                preserved(&before, &path).unwrap();
            }
            Err(_) => assert_eq!(std::fs::read(&path).unwrap(), bytes),
        }
    }
}

#[test]
fn raw_multi_valued_event_attribute_is_a_json_list() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let log = random_log(&mut rng, 5);
    let e = &log.events[0];
    let readings = vec![
        reading("d0-1", "d0", 2.5, e.time.millis() + 1000, None, Some(e.id.clone())),
        reading("d0-1", "d0", -1.0, e.time.millis(), None, Some(e.id.clone())),
    ];
    let spec = IntegrationSpec {
        device_type: "d0".into(),
        property: None,
        pattern: Pattern::EventAttribute,
        target: e.activity.clone(),
        attribute_name: "raw".into(),
        correlation: CorrelationRule::new(CorrelationMode::ExplicitEventKey),
        manipulation: Manipulation::raw(),
        qualifier: String::new(),
        materialize_devices: false,
    };
    let plan = plan_with_limit(&spec, &log, &readings, 10).unwrap();
    assert_eq!(plan.preview[0].value, AttrValue::Text("[-1.0,2.5]".into()));
    assert!(plan.warnings.iter().any(|w| w.starts_with("raw multi-valued: serialized list")));
}

#[test]
fn filter_then_aggregate_example() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let log = random_log(&mut rng, 5);
    let e = &log.events[0];
    let readings: Vec<_> = [1.0, 5.0, 9.0, 20.0]
        .iter()
        .map(|v| reading("d0-1", "d0", *v, e.time.millis(), None, Some(e.id.clone())))
        .collect();
    let spec = IntegrationSpec {
        device_type: "d0".into(),
        property: None,
        pattern: Pattern::EventAttribute,
        target: e.activity.clone(),
        attribute_name: "hot".into(),
        correlation: CorrelationRule::new(CorrelationMode::ExplicitEventKey),
        manipulation: Manipulation::filter_then_aggregate(ValueRange::new(Some(4.0), Some(10.0)), AggFn::Average),
        qualifier: "observed-by".into(),
        materialize_devices: true,
    };
    let plan = plan_with_limit(&spec, &log, &readings, 10).unwrap();
    assert_eq!(plan.preview[0].value, AttrValue::Float(7.0));
    assert_eq!(plan.devices_to_materialize, vec!["d0-1".to_string()]);
    assert_eq!(plan.expected.e2o_added, 1);
}
