#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reifen::ccbp::{Ccbp, CcbpParams, DEFAULT_EPS_MAX};
use reifen::generators::{flat_sample, graph_fixture, haar_graph, snowflake, AngleSequence, GraphKind, HaarGraphSpec, SnowflakeSpec};
use reifen::param::{flow, flow_map, sigma_jet};
use reifen::{build_net, scale_radius, PointCloud};

pub const EPS: f64 = 0.1;

pub fn flat_line() -> PointCloud {
    flat_sample(2, 1, 10_000, 0.0, None).unwrap()
}

pub fn flat_plane() -> PointCloud {
    flat_sample(3, 2, 100, 0.0, None).unwrap()
}

pub fn smooth_bump(count: usize) -> PointCloud {
    graph_fixture(&GraphKind::SmoothBump { height: 0.02, width: 0.15 }, count).unwrap().cloud
}

pub fn haar(alpha: f64, amplitude: f64, depth: usize, grid: usize) -> PointCloud {
    let spec = HaarGraphSpec { amplitude, ..HaarGraphSpec::holder(alpha, depth, grid) };
    haar_graph(&spec).unwrap().generated.cloud
}

pub fn snowflake_spec(alpha: f64, samples: usize) -> SnowflakeSpec {
    SnowflakeSpec::new(AngleSequence::Geometric { c: 0.02, alpha, base: 2.0 }, 8, samples)
}

pub fn snow(alpha: f64, samples: usize) -> PointCloud {
    snowflake(&snowflake_spec(alpha, samples)).unwrap().generated.cloud
}

/// The fixtures the per-map checks run on, with names.
pub fn map_fixtures() -> Vec<(&'static str, PointCloud)> {
    vec![
        ("flat plane", flat_sample(3, 2, 60, 0.0, None).unwrap()),
        ("smooth bump", smooth_bump(1 << 13)),
        ("haar 0.5", haar(0.5, 0.02, 13, 1 << 13)),
        ("snowflake 0.5", snow(0.5, 1 << 13)),
    ]
}

/// Normalized cloud and lazy CCBP to depth `k`.
pub fn lazy_ccbp(cloud: &PointCloud, k: usize) -> Ccbp {
    let (cloud, _) = cloud.normalized();
    let cloud = Arc::new(cloud);
    let net = build_net(&cloud, k);
    let params = CcbpParams {
        eps_max: DEFAULT_EPS_MAX.max(EPS),
        ..CcbpParams::new(EPS)
    };
    Ccbp::assemble_lazy(cloud, net, params).unwrap()
}

/// Seeded points of `Σ_0` within the middle of the cloud's projection.
pub fn sigma0_starts(ccbp: &Ccbp, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = ccbp.d();
    (0..count)
        .map(|_| {
            let c = DVector::from_iterator(d, (0..d).map(|_| rng.gen_range(-0.3..0.3)));
            ccbp.sigma0().point_at(&c).unwrap().as_slice().to_vec()
        })
        .collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let v = DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.0..1.0)));
    let norm = v.norm();
    if norm < 1e-3 {
        return random_unit(rng, n);
    }
    v / norm
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative(a: &DVector<f64>, b: &DVector<f64>, floor: f64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(floor)
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `y = f_k(z)` plus an offset of up to `12 r_k`, so probes cover the partition ramps.
pub fn probes(ccbp: &Ccbp, count: usize, seed: u64, max_k: usize) -> Vec<(usize, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = sigma0_starts(ccbp, count, seed);
    starts
        .into_iter()
        .map(|z| {
            let k = rng.gen_range(0..max_k);
            let y = flow_map(ccbp, &z, k).unwrap();
            let off = random_unit(&mut rng, ccbp.n()) * (rng.gen_range(0.0..12.0) * scale_radius(k));
            (k, (y + off).as_slice().to_vec())
        })
        .collect()
}

/// Worst relative errors; second derivatives are measured against their natural size `ε / r_k`.
#[derive(Default, Debug)]
pub struct Worst {
    pub jac: f64,
    pub hess: f64,
    pub flow: f64,
    pub dir2: f64,
}

/// Analytic `Dσ_k`, `D²σ_k`, `Df_K`, `A_K` against central differences at `count` probes.
pub fn derivative_errors(ccbp: &Ccbp, count: usize, max_k: usize) -> Worst {
    let n = ccbp.n();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = Worst::default();
    for (k, y) in probes(ccbp, count, 11, max_k) {
        let r = scale_radius(k);
        let h = 1e-4 * r;
        let yv = DVector::from_column_slice(&y);
        let u = random_unit(&mut rng, n);
        let v = random_unit(&mut rng, n);
        let jet = sigma_jet(ccbp, &y, k).unwrap();
        let plus = sigma_jet(ccbp, (&yv + &v * h).as_slice(), k).unwrap();
        let minus = sigma_jet(ccbp, (&yv - &v * h).as_slice(), k).unwrap();
        let fd = (&plus.value - &minus.value) / (2.0 * h);
        worst.jac = worst.jac.max(relative(&(&jet.jac * &v), &fd, 1.0));
        // D²σ is only Lipschitz at the ends of the partition ramps: difference more finely.
        let h2 = 1e-5 * r;
        let plus = sigma_jet(ccbp, (&yv + &v * h2).as_slice(), k).unwrap();
        let minus = sigma_jet(ccbp, (&yv - &v * h2).as_slice(), k).unwrap();
        let fd2 = (&plus.jac * &u - &minus.jac * &u) / (2.0 * h2);
        worst.hess = worst.hess.max(relative(&jet.hess_apply(&u, &v), &fd2, EPS / r));
    }
    let d = ccbp.d();
    for z in sigma0_starts(ccbp, count / 4, 13) {
        let coeffs = DVector::from_iterator(d, (0..d).map(|_| rng.gen_range(-1.0..1.0)));
        let u = ccbp.sigma0().frame() * coeffs;
        let u = &u / u.norm();
        let h = 1e-3 * scale_radius(max_k);
        let zv = DVector::from_column_slice(&z);
        let jet = flow(ccbp, &z, max_k, u.as_slice()).unwrap();
        let zp = &zv + &u * h;
        let zm = &zv - &u * h;
        let fd = (flow_map(ccbp, zp.as_slice(), max_k).unwrap() - flow_map(ccbp, zm.as_slice(), max_k).unwrap()) / (2.0 * h);
        let df = DVector::from_column_slice(&jet.derivative);
        worst.flow = worst.flow.max(relative(&df, &fd, 1.0));
        let dp = DVector::from_column_slice(&flow(ccbp, zp.as_slice(), max_k, u.as_slice()).unwrap().derivative);
        let dm = DVector::from_column_slice(&flow(ccbp, zm.as_slice(), max_k, u.as_slice()).unwrap().derivative);
        let fd2 = (dp - dm) / (2.0 * h);
        worst.dir2 = worst.dir2.max(relative(&DVector::from_column_slice(&jet.dir2), &fd2, EPS / scale_radius(max_k)));
    }
    worst
}

