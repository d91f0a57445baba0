mod common;

use std::collections::BTreeSet;

use common::*;
use ocelink_core::iot::{device_summary, infer_mapping, normalize, readings_to_table, ColumnMapping, Role};
use ocelink_core::{ReadingValue, Table};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mapping_for(table: &Table) -> ColumnMapping {
    let suggestion = infer_mapping(table).unwrap();
    assert!(suggestion.unresolved.iter().all(|r| !Role::REQUIRED.contains(r)), "{suggestion:?}");
    suggestion.mapping
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_row_is_accepted_or_rejected_once(seed in any::<u64>(), rows in 0usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = random_corrupted_table(&mut rng, rows);
        let out = normalize(&table, &mapping_for(&table)).unwrap();
        prop_assert_eq!(out.readings.len() + out.rejects.len(), rows);
        let accepted: BTreeSet<usize> = out.readings.iter().map(|r| r.source_row).collect();
        let rejected: BTreeSet<usize> = out.rejects.iter().map(|r| r.source_row).collect();
        prop_assert_eq!(accepted.len(), out.readings.len());
        prop_assert!(accepted.is_disjoint(&rejected));
        prop_assert_eq!(accepted.union(&rejected).count(), rows);
    }

    #[test]
    fn normalizing_normalized_output_is_identity(seed in any::<u64>(), rows in 1usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = random_corrupted_table(&mut rng, rows);
        let first = normalize(&table, &mapping_for(&table)).unwrap();
        let (rendered, mapping) = readings_to_table(&first.readings);
        let second = normalize(&rendered, &mapping).unwrap();
        prop_assert!(second.rejects.is_empty());
        prop_assert_eq!(second.readings, first.readings);
    }

    #[test]
    fn summary_counts_add_up(seed in any::<u64>(), rows in 0usize..150) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = random_corrupted_table(&mut rng, rows);
        let out = normalize(&table, &mapping_for(&table)).unwrap();
        let s = device_summary(&out.readings);
        prop_assert_eq!(s.total_records, out.readings.len());
        prop_assert_eq!(s.device_types.iter().map(|d| d.record_count).sum::<usize>(), out.readings.len());
        for d in &s.device_types {
            let devices: BTreeSet<_> = out.readings.iter().filter(|r| r.device.device_type == d.device_type).map(|r| &r.device.device_id).collect();
            prop_assert_eq!(d.device_count, devices.len());
        }
    }
}

#[test]
fn numeric_results_stay_numeric() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let table = random_corrupted_table(&mut rng, 300);
    let out = normalize(&table, &mapping_for(&table)).unwrap();
    assert!(out.readings.iter().all(|r| matches!(r.result, ReadingValue::Numeric(_))));
    assert!(out.rejects.iter().any(|r| r.reason.code() == "unparseable-number"));
}
