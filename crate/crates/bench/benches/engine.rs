use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ocelink_core::integrate::{aggregate, correlate, plan_with_limit, AggFn, CorrelationMode, CorrelationRule, IntegrationSpec, Manipulation, Pattern, Target};
use ocelink_core::iot::{infer_mapping, normalize};
use ocelink_core::scenario::{generate, Scenario, ScenarioParams};
use ocelink_core::NormalizedReading;

fn scenario(trucks: usize) -> (Scenario, Vec<NormalizedReading>) {
    let s = generate(&ScenarioParams { trucks, ..Default::default() }).unwrap();
    let mut readings = Vec::new();
    for table in [&s.gps, &s.weights] {
        readings.extend(normalize(table, &infer_mapping(table).unwrap().mapping).unwrap().readings);
    }
    (s, readings)
}

fn bench_aggregate(c: &mut Criterion) {
    let mut group = c.benchmark_group("aggregate");
    for n in [16usize, 1024, 65_536] {
        let values: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 * 0.25).collect();
        for f in [AggFn::Average, AggFn::Median] {
            group.bench_with_input(BenchmarkId::new(format!("{f:?}"), n), &values, |b, v| {
                b.iter(|| aggregate(black_box(v), f).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_normalize(c: &mut Criterion) {
    let s = generate(&ScenarioParams { trucks: 50, ..Default::default() }).unwrap();
    let mapping = infer_mapping(&s.gps).unwrap().mapping;
    c.bench_function(&format!("normalize/gps_{}_rows", s.gps.rows.len()), |b| {
        b.iter(|| normalize(black_box(&s.gps), &mapping).unwrap())
    });
}

fn bench_correlate(c: &mut Criterion) {
    let (s, readings) = scenario(50);
    let mut group = c.benchmark_group("correlate");
    let cases = [
        ("explicit_event_key", CorrelationRule::new(CorrelationMode::ExplicitEventKey), Target::Activity("Weigh Loaded".into())),
        ("explicit_object_key", CorrelationRule::new(CorrelationMode::ExplicitObjectKey), Target::ObjectType("Truck".into())),
        ("time_window", CorrelationRule::window(60_000, 60_000), Target::Activity("Load Cargo".into())),
        ("lifecycle_span", CorrelationRule::new(CorrelationMode::LifecycleSpan), Target::ObjectType("Truck".into())),
    ];
    for (name, rule, target) in cases {
        group.bench_function(name, |b| b.iter(|| correlate(black_box(&readings), &s.log, &rule, &target).unwrap()));
    }
    group.finish();
}

fn bench_plan(c: &mut Criterion) {
    let (s, readings) = scenario(50);
    let spec = IntegrationSpec {
        device_type: "gps".into(),
        property: None,
        pattern: Pattern::ObjectAttribute,
        target: "Truck".into(),
        attribute_name: "max_speed_kmh".into(),
        correlation: CorrelationRule::new(CorrelationMode::ExplicitObjectKey),
        manipulation: Manipulation::aggregate(AggFn::Max),
        qualifier: "tracked-by".into(),
        materialize_devices: true,
    };
    c.bench_function("plan/gps_max_speed", |b| b.iter(|| plan_with_limit(&spec, &s.log, black_box(&readings), 20).unwrap()));
}

criterion_group!(benches, bench_aggregate, bench_normalize, bench_correlate, bench_plan);
criterion_main!(benches);
