use ppeq_core::clustering::{adjusted_rand_index, build_class_profiles, elbow_scan, standardize, Matrix};
use ppeq_core::ingest::prepare_records;
use ppeq_core::sim::{generate_synthetic_dataset, three_class_spec};

#[test]
fn three_generated_classes_are_recovered() {
    let data = generate_synthetic_dataset(&three_class_spec(), 42).unwrap();
    let prepared = prepare_records(&data.records, 1.0).unwrap();
    assert!(prepared.excluded.is_empty());
    let features: Vec<_> = prepared.patients.iter().map(|p| p.features).collect();
    let (z, _) = standardize(&Matrix::from_features(&features)).unwrap();
    let ks: Vec<usize> = (1..=10).collect();
    let scan = elbow_scan(&z, &ks, 25, 7).unwrap();
    assert_eq!(scan.suggested_k, 3);
    let truth: Vec<u32> = data.labels.iter().map(|(_, c)| *c).collect();
    let ari = adjusted_rand_index(&scan.result_for(3).unwrap().assignments, &truth);
    assert!(ari >= 0.9);
    let start = data.records.first().unwrap().admit;
    let profiles = build_class_profiles(&prepared.patients, &scan.result_for(3).unwrap().assignments, (start, start.plus_minutes(365 * 1440))).unwrap();
    assert_eq!(profiles.profiles.len(), 3);
}
