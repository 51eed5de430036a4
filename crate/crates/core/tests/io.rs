mod common;

use reifen::io::{ingest, read_cloud, write_cloud, Format};
use reifen::PointCloud;

fn same(a: &PointCloud, b: &PointCloud) -> bool {
    (a.n(), a.d(), a.coords(), a.weights()) == (b.n(), b.d(), b.coords(), b.weights())
}

fn check_round_trip(cloud: &PointCloud, format: Format, name: &str) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(name);
    write_cloud(cloud, &path, format).unwrap();
    assert!(same(&read_cloud(&path, format).unwrap(), cloud));

    let (normalized, norm) = ingest(&path, format).unwrap();
    let (expected, expected_norm) = cloud.normalized();
    assert!(same(&normalized, &expected));
    assert_eq!(norm, expected_norm);
    for i in (0..cloud.len()).step_by(97) {
        let back = norm.invert(normalized.point(i));
        for (a, b) in back.iter().zip(cloud.point(i)) {
            assert!((a - b).abs() <= 1e-15 * (1.0 + b.abs()) * 4.0, "{a} vs {b}");
        }
    }
}

#[test]
fn fixtures_round_trip_through_both_formats() {
    let cloud = common::snow(0.5, 4096);
    check_round_trip(&cloud, Format::Csv, "snow.csv");
    check_round_trip(&cloud, Format::Binary, "snow.bin");
    let weights = (0..cloud.len()).map(|i| 0.5 + (i % 7) as f64 / 3.0).collect();
    let weighted = cloud.with_weights(weights).unwrap();
    check_round_trip(&weighted, Format::Csv, "weighted.csv");
    check_round_trip(&weighted, Format::Binary, "weighted.rfp");
}
