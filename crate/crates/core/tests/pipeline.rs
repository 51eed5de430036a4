mod common;

use common::{flat_line, haar, lazy_ccbp, smooth_bump};
use nalgebra::{DMatrix, DVector};
use reifen::diagnostics::pipeline::inverse_jacobian;
use reifen::diagnostics::{predict_and_verify, sigma0_samples, PipelineConfig};
use reifen::generators::{graph_fixture, punch_holes, GraphKind};
use reifen::geometry::Ball;
use reifen::param::{flow, invert_with_tolerance};
use reifen::Error;

#[test]
fn flat_input_gives_the_identity_and_a_zero_jones_sum() {
    let config = PipelineConfig { max_k: 4, ..Default::default() };
    let report = predict_and_verify(&flat_line(), &config).unwrap();
    assert!(report.max_displacement <= 1e-12, "{}", report.max_displacement);
    assert_eq!(report.jones_beta.value, 0.0);
    assert_eq!(report.max_beta, 0.0);
    assert!(report.forward.fit.identically_constant);
    assert!(report.passes());
}

#[test]
fn jones_partial_sums_grow_with_depth() {
    let cloud = graph_fixture(&GraphKind::SmoothBump { height: 0.004, width: 0.15 }, 1 << 13).unwrap().cloud;
    let shallow = predict_and_verify(&cloud, &PipelineConfig { max_k: 3, ..Default::default() }).unwrap();
    let deep = predict_and_verify(&cloud, &PipelineConfig { max_k: 5, ..Default::default() }).unwrap();
    assert_eq!(shallow.jones_beta.partial[..], deep.jones_beta.partial[..=3]);
    assert!(deep.jones_beta.partial.windows(2).all(|w| w[0] <= w[1]));
    assert!(deep.jones_beta.value >= shallow.jones_beta.value);
}

#[test]
fn inverse_derivative_is_the_pseudo_inverse_of_the_forward_derivative() {
    const K: usize = 4;
    let cloud = smooth_bump(1 << 13);
    let ccbp = lazy_ccbp(&cloud, K);
    let (normalized, _) = cloud.normalized();
    let dir = ccbp.sigma0().frame_vector(0);
    for z in sigma0_samples(&ccbp, &normalized, 12, 5).unwrap() {
        let jet = flow(&ccbp, z.as_slice(), K, dir.as_slice()).unwrap();
        let c = ccbp.sigma0().coordinates(&z).unwrap();
        let x = jet.value().to_vec();
        // Inverting the exact image must land back on z.
        let back = invert_with_tolerance(&ccbp, c.as_slice(), &x, K, 1e-14).unwrap();
        assert!((back.coords[0] - c[0]).abs() < 1e-12);

        let df: DMatrix<f64> = jet.frame_matrix();
        let pinv = (df.transpose() * &df).try_inverse().unwrap() * df.transpose();
        let measured = inverse_jacobian(&ccbp, c.as_slice(), &x, K, 1e-5).unwrap();
        for (a, m) in measured.iter().enumerate() {
            let expected = pinv[(0, a)];
            assert!((m - expected).abs() <= 1e-5 * (1.0 + expected.abs()), "axis {a}: {m} vs {expected}");
        }
    }
}

#[test]
fn non_flat_clouds_abort_with_the_flatness_report() {
    let saw = graph_fixture(&GraphKind::Sawtooth { slope: 1.0, teeth: 4 }, 4097).unwrap().cloud;
    let config = PipelineConfig { eps: 0.01, max_k: 3, ..Default::default() };
    match predict_and_verify(&saw, &config) {
        Err(Error::FlatnessAbort { max_defect, eps, report }) => {
            assert_eq!(eps, 0.01);
            assert!(!report.passes);
            assert!(max_defect > eps);
            assert_eq!(report.max_defect, max_defect);
        }
        other => panic!("expected a flatness abort, got {other:?}"),
    }
}

#[test]
fn holes_below_the_sample_spacing_leave_the_exponent_in_place() {
    let count = 1 << 13;
    let graph = haar(0.5, 0.02, 13, count);
    let spacing = 1.0 / (count - 1) as f64;
    let balls: Vec<Ball> = [0.2, 0.35, 0.5, 0.65, 0.8]
        .iter()
        .map(|f| {
            let i = (f * count as f64) as usize;
            Ball::new(DVector::from_column_slice(graph.point(i)), 0.6 * spacing).unwrap()
        })
        .collect();
    let holed = punch_holes(&graph, &balls).unwrap().cloud;
    assert_eq!(graph.len() - holed.len(), balls.len());
    let config = PipelineConfig::default();
    let before = predict_and_verify(&graph, &config).unwrap();
    let after = predict_and_verify(&holed, &config).unwrap();
    let (b, a) = (before.forward.fit.exponent.unwrap(), after.forward.fit.exponent.unwrap());
    assert!((b - a).abs() < 0.05, "η̂ {b} -> {a}");
}

#[test]
fn band_clusters_appear_only_around_holes() {
    let line = flat_line();
    let config = PipelineConfig { max_k: 4, ..Default::default() };
    assert_eq!(predict_and_verify(&line, &config).unwrap().band_clusters, 0);
    let hole = Ball::new(DVector::from_column_slice(line.point(3000)), 0.04).unwrap();
    let holed = punch_holes(&line, &[hole]).unwrap().cloud;
    let report = predict_and_verify(&holed, &config).unwrap();
    // Both sides of the hole at every scale whose band fits inside it.
    assert!(report.band_clusters >= 2, "{}", report.band_clusters);
    assert!(report.max_displacement <= 1e-12);
    assert!(report.forward.fit.identically_constant);
}
