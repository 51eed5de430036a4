//! Plane-variation coefficients of a CCBP: `ε_k(y)` and `γ_k(x)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ccbp::Ccbp;
use crate::cloud::PointCloud;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{plane_dist, plane_dist_bound, scale_radius, AffinePlane, Point};

/// Plane pairs closer than this (normalized) are treated as equal by [`epsilon_k`].
pub const COINCIDENT: f64 = 1e-13;

/// Which dilated ball around `x_{i,l}` the point `y` must lie in for the pair
/// `(j,k), (i,l)` to count in `ε_k(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallReading {
    /// `11 B_{i,l}`, radius `11 r_l`.
    #[default]
    ScaleL,
    /// `11 B_{i,k}`, radius `11 r_k` regardless of `l`.
    LiteralK,
}

/// `ε_k(y)`: the largest `d_{x_{i,l}, 100 r_l}(P_{j,k}, P_{i,l})` over `l ∈ {k-1, k}`
/// and net points with `y ∈ 10 B_{j,k}` and `y` in the reading's ball around `x_{i,l}`.
///
/// Zero outside `V_k^{10}`. At `k = 0` only `l = 0` is used. Pairs whose
/// [`plane_dist_bound`] cannot exceed the running maximum (or [`COINCIDENT`])
/// are skipped.
pub fn epsilon_k(ccbp: &Ccbp, y: &[f64], k: usize, reading: BallReading) -> Result<f64> {
    check_dim(ccbp.n(), y.len())?;
    if k > ccbp.max_scale() {
        return Err(Error::MissingPlane { scale: k });
    }
    let net = ccbp.net();
    let rk = scale_radius(k);
    let js = net.within(k, y, 10.0 * rk);
    if js.is_empty() {
        return Ok(0.0);
    }
    let samples = ccbp.params().check_samples;
    let mut best = 0.0f64;
    for l in k.saturating_sub(1)..=k {
        let rl = scale_radius(l);
        let reach = match reading {
            BallReading::ScaleL => 11.0 * rl,
            BallReading::LiteralK => 11.0 * rk,
        };
        for i in net.within(l, y, reach) {
            let xi = Point::from_column_slice(net.center(l, i));
            let pi = ccbp.plane(l, i);
            for &j in &js {
                if l == k && i == j {
                    continue;
                }
                let pj = ccbp.plane(k, j);
                if plane_dist_bound(&xi, 100.0 * rl, pj, pi).is_some_and(|b| b <= best.max(COINCIDENT)) {
                    continue;
                }
                let v = plane_dist(&xi, 100.0 * rl, pj, pi, samples)?;
                best = best.max(v);
            }
        }
    }
    Ok(best)
}

/// `γ_k(x) = d_{x,r_k}(P_{k+1}(x), P_k(x)) + sup_{y ∈ E ∩ B(x, 35 r_k)} d_{x,r_k}(P_k(x), P_k(y))`,
/// where `P_k(y)` is the plane of the net point nearest `y` at scale `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRecord {
    pub x: Vec<f64>,
    pub k: usize,
    pub value: f64,
    /// First summand (change of plane between scales `k` and `k + 1`).
    pub transition: f64,
    /// Second summand (spread of planes over nearby points).
    pub spread: f64,
}

pub fn gamma_k(cloud: &PointCloud, ccbp: &Ccbp, x: &[f64], k: usize) -> Result<GammaRecord> {
    check_dim(ccbp.n(), x.len())?;
    if k + 1 > ccbp.max_scale() {
        return Err(Error::MissingPlane { scale: k + 1 });
    }
    let net = ccbp.net();
    let r = scale_radius(k);
    let xp = Point::from_column_slice(x);
    let samples = ccbp.params().check_samples;
    let pk = ccbp.plane(k, net.nearest(k, x).0);
    let pk1 = ccbp.plane(k + 1, net.nearest(k + 1, x).0);
    let transition = one_sided_fallback(&xp, r, pk1, pk, samples)?;
    let owners: BTreeSet<usize> = cloud
        .ball_indices(x, 35.0 * r)
        .into_iter()
        .map(|i| net.nearest(k, cloud.point(i)).0)
        .collect();
    let mut spread = 0.0f64;
    for j in owners {
        spread = spread.max(one_sided_fallback(&xp, r, pk, ccbp.plane(k, j), samples)?);
    }
    Ok(GammaRecord {
        x: x.to_vec(),
        k,
        value: transition + spread,
        transition,
        spread,
    })
}

/// `d_{x,r}(p, q)`; when `q` misses the ball, the one-sided distance from
/// `p ∩ B(x, r)` to `q` (normalized by `r`) stands in.
fn one_sided_fallback(x: &Point, r: f64, p: &AffinePlane, q: &AffinePlane, samples: usize) -> Result<f64> {
    match plane_dist(x, r, p, q, samples) {
        Err(Error::PlaneMissesBall { .. }) => {
            let center = p.project(x)?;
            let h = (r * r - (center.clone() - x).norm_squared()).max(0.0).sqrt();
            let mut worst = q.distance(center.as_slice());
            for dir in 0..p.d() {
                let v = p.frame_vector(dir) * h;
                worst = worst.max(q.distance((center.clone() + &v).as_slice()));
                worst = worst.max(q.distance((center.clone() - &v).as_slice()));
            }
            Ok(worst / r)
        }
        other => other,
    }
}

/// `Σ_k γ_k² / r_k^{2α}` over the given records.
pub fn jones_gamma(records: &[GammaRecord], alpha: f64) -> f64 {
    records
        .iter()
        .map(|g| g.value * g.value / scale_radius(g.k).powf(2.0 * alpha))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccbp::CcbpParams;
    use crate::net::build_net;

    fn flat_ccbp() -> (PointCloud, Ccbp) {
        let coords = (0..801).flat_map(|i| [i as f64 / 800.0 - 0.5, 0.0]).collect();
        let cloud = PointCloud::new(2, 1, coords, None).unwrap();
        let ccbp = Ccbp::assemble(&cloud, build_net(&cloud, 2), CcbpParams::new(0.02)).unwrap();
        (cloud, ccbp)
    }

    fn tilt(ccbp: &mut Ccbp, k: usize, j: usize, phi: f64) {
        let x = Point::from_column_slice(ccbp.net().center(k, j));
        let p = AffinePlane::from_spanning(x, &[Point::from_vec(vec![phi.cos(), phi.sin()])]).unwrap();
        ccbp.set_plane(k, j, p).unwrap();
    }

    #[test]
    fn flat_collection_has_zero_coefficients() {
        let (cloud, ccbp) = flat_ccbp();
        for t in [-0.4, -0.1, 0.0, 0.23] {
            for k in 0..=2 {
                assert_eq!(epsilon_k(&ccbp, &[t, 0.0], k, BallReading::ScaleL).unwrap(), 0.0);
            }
            let g = gamma_k(&cloud, &ccbp, &[t, 0.0], 1).unwrap();
            assert!(g.value < 1e-12);
        }
        assert!(gamma_k(&cloud, &ccbp, &[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn epsilon_vanishes_outside_v10() {
        let (_, ccbp) = flat_ccbp();
        assert_eq!(epsilon_k(&ccbp, &[0.0, 0.5], 2, BallReading::ScaleL).unwrap(), 0.0);
    }

    #[test]
    fn single_tilt_is_seen_by_epsilon_and_gamma() {
        let (cloud, mut ccbp) = flat_ccbp();
        let phi: f64 = 0.05;
        let (j, _) = ccbp.net().nearest(2, &[0.0, 0.0]);
        tilt(&mut ccbp, 2, j, phi);
        let xj = ccbp.net().center(2, j).to_vec();
        // Brute-force oracle: lines crossing at x_t with angle φ, compared on B(x_{i,l}, 100 r_l),
        // differ by (100 r_l + |x_{i,l} - x_t|) sin φ / (100 r_l).
        for reading in [BallReading::ScaleL, BallReading::LiteralK] {
            let mut oracle = 0.0f64;
            for l in [1usize, 2] {
                let rl = scale_radius(l);
                let reach = match reading {
                    BallReading::ScaleL => 11.0 * rl,
                    BallReading::LiteralK => 11.0 * scale_radius(2),
                };
                for i in 0..ccbp.net().len(l) {
                    let xi = ccbp.net().center(l, i);
                    if crate::geometry::dist(xi, &xj) <= reach {
                        oracle = oracle.max(phi.sin() * (1.0 + crate::geometry::dist(xi, &xj) / (100.0 * rl)));
                    }
                }
            }
            let e = epsilon_k(&ccbp, &xj, 2, reading).unwrap();
            assert!((e - oracle).abs() <= 1e-9, "{e} vs {oracle}");
            assert!(e >= phi.sin() && e <= 1.12 * phi.sin());
        }
        // Scale-1 γ at the tilted point: the transition term sees the tilt.
        let g = gamma_k(&cloud, &ccbp, &xj, 1).unwrap();
        assert!((g.transition - phi.sin()).abs() <= 0.05 * phi.sin(), "{g:?}");
        assert!(g.spread < 1e-12);
        let total = jones_gamma(&[g.clone()], 0.5);
        assert!((total - g.value * g.value / 0.1).abs() < 1e-12);
    }

    #[test]
    fn epsilon_is_bounded_by_coherence_defect() {
        let coords = (0..1200)
            .flat_map(|i| {
                let t = i as f64 / 1199.0 - 0.5;
                [t, 0.01 * (7.0 * t).sin() + 0.003 * (40.0 * t).cos()]
            })
            .collect();
        let cloud = PointCloud::new(2, 1, coords, None).unwrap();
        let ccbp = Ccbp::assemble(&cloud, build_net(&cloud, 2), CcbpParams::new(0.02)).unwrap();
        let report = ccbp.validate();
        for s in 0..60 {
            let y = [-0.45 + 0.015 * s as f64, 0.0];
            for k in 1..=2 {
                let e = epsilon_k(&ccbp, &y, k, BallReading::ScaleL).unwrap();
                assert!(e <= 1.05 * report.max_defect + 1e-12, "{e} > {}", report.max_defect);
            }
        }
    }
}
