mod common;

use common::*;
use nalgebra::DVector;
use reifen::param::{flow, flow_map, invert_from, invert_with_tolerance, sigma, tail_bound, INVERT_TOLERANCE};
use reifen::scale_radius;

const K: usize = 6;

#[test]
fn derivatives_match_finite_differences() {
    for (name, cloud) in map_fixtures() {
        let ccbp = lazy_ccbp(&cloud, K);
        let w = derivative_errors(&ccbp, 200, K);
        println!("{name}: {w:?}");
        assert!(w.jac < 1e-5 && w.flow < 1e-5, "{name}: {w:?}");
        assert!(w.hess < 1e-4 && w.dir2 < 1e-4, "{name}: {w:?}");
    }
}

#[test]
fn displacements_obey_the_scale_bounds() {
    for (name, cloud) in map_fixtures() {
        let ccbp = lazy_ccbp(&cloud, K);
        for (k, y) in probes(&ccbp, 2000, 3, K) {
            let s = sigma(&ccbp, &y, k).unwrap();
            let moved = distance(s.as_slice(), &y);
            assert!(moved <= 10.0 * scale_radius(k), "{name}: k={k} moved {moved:e}");
        }
        let u = ccbp.sigma0().frame_vector(0);
        for z in sigma0_starts(&ccbp, 200, 5) {
            let jet = flow(&ccbp, &z, K, u.as_slice()).unwrap();
            assert!(jet.step_ratios().iter().all(|&q| q <= 1.0), "{name}: {:?}", jet.step_ratios());
            let total = distance(&jet.z, jet.value());
            assert!(total <= tail_bound(0));
        }
    }
}

#[test]
fn flat_plane_flow_is_the_identity() {
    let ccbp = lazy_ccbp(&flat_plane(), K);
    let u = ccbp.sigma0().frame_vector(0);
    for z in sigma0_starts(&ccbp, 100, 1) {
        let jet = flow(&ccbp, &z, K, u.as_slice()).unwrap();
        assert!(distance(&jet.z, jet.value()) < 1e-12);
        assert!((DVector::from_column_slice(&jet.derivative) - &u).norm() < 1e-12);
        assert!(jet.dir2.iter().all(|v| v.abs() < 1e-9));
    }
}

#[test]
fn inversion_recovers_the_parameter() {
    for (name, cloud) in map_fixtures() {
        let ccbp = lazy_ccbp(&cloud, K);
        for z in sigma0_starts(&ccbp, 50, 9) {
            let coords = ccbp.sigma0().coordinates(&DVector::from_column_slice(&z)).unwrap();
            let x = flow_map(&ccbp, &z, K).unwrap();
            let start: Vec<f64> = coords.iter().map(|c| c + 1e-3).collect();
            let coarse = invert_from(&ccbp, &start, x.as_slice(), K).unwrap();
            assert!(coarse.residual <= INVERT_TOLERANCE);
            let inv = invert_with_tolerance(&ccbp, &start, x.as_slice(), K, 1e-13).unwrap();
            let err = inv.coords.iter().zip(coords.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-11, "{name}: {err:e}");
        }
    }
}
