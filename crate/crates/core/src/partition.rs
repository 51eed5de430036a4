//! The partition of unity `θ_{j,k}`, `ψ_k` subordinate to the balls `10 B_{j,k}`,
//! with closed-form gradients and Hessians.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result};
use crate::geometry::scale_radius;
use crate::net::MultiscaleNet;

/// Quintic smoothstep `6u⁵ - 15u⁴ + 10u³` on `[0, 1]` with its first two derivatives.
fn smoothstep(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if u >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let u2 = u * u;
        (
            (u2 * u * (10.0 + u * (-15.0 + 6.0 * u))).clamp(0.0, 1.0),
            30.0 * u2 * (1.0 - u) * (1.0 - u),
            60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
        )
    }
}

/// Radial profile: 1 on `[0, 8]`, 0 on `[10, ∞)`, strictly decreasing between.
/// Returns value and the first two derivatives in `t`.
pub fn bump_jet(t: f64) -> (f64, f64, f64) {
    let (s, ds, dds) = smoothstep((t - 8.0) / 2.0);
    (1.0 - s, -ds / 2.0, -dds / 4.0)
}

/// Profile of the background factors: 1 on `[0, 8]`, 0 on `[9, ∞)`.
fn cutoff_jet(t: f64) -> (f64, f64, f64) {
    let (s, ds, dds) = smoothstep(t - 8.0);
    (1.0 - s, -ds, -dds)
}

/// Value, gradient and Hessian of a scalar function of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet {
    fn constant(n: usize, value: f64) -> Self {
        Jet {
            value,
            grad: DVector::zeros(n),
            hess: DMatrix::zeros(n, n),
        }
    }

    /// `y ↦ profile(|y - x| / r)`.
    fn radial(y: &[f64], x: &[f64], r: f64, profile: (f64, f64, f64)) -> Self {
        let n = y.len();
        let (v, dv, ddv) = profile;
        if dv == 0.0 && ddv == 0.0 {
            return Jet::constant(n, v);
        }
        let diff = DVector::from_iterator(n, y.iter().zip(x).map(|(a, b)| a - b));
        let rho = diff.norm();
        let e = diff / rho;
        let grad = &e * (dv / r);
        let eet = &e * e.transpose();
        let hess = &eet * (ddv / (r * r)) + (DMatrix::identity(n, n) - eet) * (dv / (r * rho));
        Jet { value: v, grad, hess }
    }

    /// Product rule.
    fn times(&self, other: &Jet) -> Jet {
        let grad = &self.grad * other.value + &other.grad * self.value;
        let cross = &self.grad * other.grad.transpose();
        let hess = &self.hess * other.value + &other.hess * self.value + &cross + cross.transpose();
        Jet {
            value: self.value * other.value,
            grad,
            hess,
        }
    }

    /// Quotient `self / s` given `s` and its jet.
    fn over(&self, s: &Jet) -> Jet {
        let q = self.value / s.value;
        let grad = (&self.grad - &s.grad * q) / s.value;
        let cross = &grad * s.grad.transpose();
        let hess = (&self.hess - &cross - cross.transpose() - &s.hess * q) / s.value;
        Jet { value: q, grad, hess }
    }
}

/// The partition at one point `y` and scale `k`.
#[derive(Debug, Clone)]
pub struct PartitionJet {
    pub k: usize,
    /// Net-local indices `j` with `θ_{j,k}(y) ≠ 0`, ascending.
    pub active: Vec<usize>,
    pub theta: Vec<Jet>,
    pub psi: Jet,
}

impl PartitionJet {
    pub fn theta_sum(&self) -> f64 {
        self.theta.iter().map(|t| t.value).sum()
    }
}

/// `θ_{j,k} = φ_{j,k} / S` and `ψ_k = φ̃_k / S`, `S = φ̃_k + Σ_j φ_{j,k}`, where
/// `φ_{j,k}(y) = bump(|y - x_{j,k}| / r_k)` and `φ̃_k = Π_j (1 - c(|y - x_{j,k}| / r_k))`
/// vanishes on `V_k^8` and equals 1 off `V_k^9`.
pub fn partition_jet(net: &MultiscaleNet, y: &[f64], k: usize) -> Result<PartitionJet> {
    check_dim(net.n(), y.len())?;
    let n = y.len();
    let r = scale_radius(k);
    let near = net.within(k, y, 10.0 * r);
    let mut background = Jet::constant(n, 1.0);
    let mut active = Vec::new();
    let mut phis = Vec::new();
    for &j in &near {
        let x = net.center(k, j);
        let t = crate::geometry::dist(y, x) / r;
        if t < 9.0 {
            let c = cutoff_jet(t);
            let factor = Jet::radial(y, x, r, (1.0 - c.0, -c.1, -c.2));
            background = background.times(&factor);
        }
        if t < 10.0 {
            active.push(j);
            phis.push(Jet::radial(y, x, r, bump_jet(t)));
        }
    }
    let mut s = background.clone();
    for p in &phis {
        s.value += p.value;
        s.grad += &p.grad;
        s.hess += &p.hess;
    }
    debug_assert!(s.value >= 0.5 - 1e-12, "partition denominator {}", s.value);
    let theta = phis.iter().map(|p| p.over(&s)).collect();
    let psi = if background.value == 0.0 && background.grad.iter().all(|&g| g == 0.0) {
        Jet::constant(n, 0.0)
    } else {
        background.over(&s)
    };
    Ok(PartitionJet { k, active, theta, psi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::net::build_net;
    use proptest::prelude::*;

    #[test]
    fn bump_endpoints() {
        assert_eq!(bump_jet(0.0), (1.0, 0.0, 0.0));
        assert_eq!(bump_jet(10.0), (0.0, 0.0, 0.0));
        assert_eq!(bump_jet(8.0), (1.0, 0.0, 0.0));
        assert!((bump_jet(9.0).0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let h = 1e-5;
        for t in [8.3, 9.0, 9.6] {
            let (_, d1, d2) = bump_jet(t);
            let fd1 = (bump_jet(t + h).0 - bump_jet(t - h).0) / (2.0 * h);
            let fd2 = (bump_jet(t + h).1 - bump_jet(t - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() <= 1e-6 * d1.abs(), "{d1} {fd1}");
            assert!((d2 - fd2).abs() <= 1e-6 * d2.abs().max(1e-3));
        }
    }

    proptest! {
        #[test]
        fn bump_is_monotone(a in 0.0f64..12.0, b in 0.0f64..12.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(bump_jet(lo).0 >= bump_jet(hi).0);
        }
    }

    fn two_ball_net() -> MultiscaleNet {
        let cloud = PointCloud::new(2, 1, vec![0.0, 0.0, 0.15, 0.0], None).unwrap();
        build_net(&cloud, 1)
    }

    #[test]
    fn far_point_is_background_only() {
        let net = two_ball_net();
        let jet = partition_jet(&net, &[5.0, 5.0], 1).unwrap();
        assert!(jet.active.is_empty());
        assert_eq!(jet.psi.value, 1.0);
        assert!(jet.psi.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn isolated_center_has_unit_theta() {
        let cloud = PointCloud::new(2, 1, vec![0.0, 0.0, 5.0, 0.0], None).unwrap();
        let net = build_net(&cloud, 1);
        let jet = partition_jet(&net, &[0.0, 0.0], 1).unwrap();
        assert_eq!(jet.active, vec![0]);
        assert_eq!(jet.theta[0].value, 1.0);
        assert!(jet.theta[0].grad.iter().all(|&g| g == 0.0));
        assert_eq!(jet.psi.value, 0.0);
    }

    #[test]
    fn overlapping_balls_match_finite_differences() {
        let net = two_ball_net();
        let r = 0.1;
        let h = 1e-6 * r;
        for y in [[0.9, 0.0], [0.0, 0.95], [1.0, 0.3], [0.5, 0.8], [-0.85, 0.1]] {
            let jet = partition_jet(&net, &y, 1).unwrap();
            assert!((jet.psi.value + jet.theta_sum() - 1.0).abs() < 1e-12);
            for (slot, &j) in jet.active.iter().enumerate() {
                for axis in 0..2 {
                    let mut yp = y;
                    let mut ym = y;
                    yp[axis] += h;
                    ym[axis] -= h;
                    let value = |p: &[f64]| {
                        let q = partition_jet(&net, p, 1).unwrap();
                        q.active.iter().position(|&i| i == j).map_or(0.0, |s| q.theta[s].value)
                    };
                    let grad = |p: &[f64]| {
                        let q = partition_jet(&net, p, 1).unwrap();
                        q.active
                            .iter()
                            .position(|&i| i == j)
                            .map_or(DVector::zeros(2), |s| q.theta[s].grad.clone())
                    };
                    let fd = (value(&yp) - value(&ym)) / (2.0 * h);
                    let g = jet.theta[slot].grad[axis];
                    let scale = jet.theta[slot].grad.norm().max(1e-3 / r);
                    assert!((g - fd).abs() <= 1e-5 * scale, "{g} {fd}");
                    let fdh = (grad(&yp) - grad(&ym)) / (2.0 * h);
                    let col = jet.theta[slot].hess.column(axis).into_owned();
                    let hscale = jet.theta[slot].hess.norm().max(1e-3 / (r * r));
                    assert!((col - fdh).norm() <= 1e-5 * hscale);
                }
            }
        }
    }

    #[test]
    fn psi_vanishes_on_v8() {
        let coords: Vec<f64> = (0..50).flat_map(|i| [i as f64 * 0.013, 0.0]).collect();
        let cloud = PointCloud::new(2, 1, coords, None).unwrap();
        let net = build_net(&cloud, 2);
        for s in 0..200 {
            let y = [s as f64 * 0.004 - 0.05, 0.05 * ((s * 7) % 11) as f64 / 11.0];
            let m = net.in_v(&y, 2, 8.0);
            let jet = partition_jet(&net, &y, 2).unwrap();
            assert!((jet.psi.value + jet.theta_sum() - 1.0).abs() < 1e-12);
            if m.inside {
                assert_eq!(jet.psi.value, 0.0);
                assert!(jet.psi.grad.norm() < 1e-12 && jet.psi.hess.norm() < 1e-12);
            }
            for (slot, &j) in jet.active.iter().enumerate() {
                assert!(jet.theta[slot].value >= 0.0);
                assert!(crate::geometry::dist(&y, net.center(2, j)) < 10.0 * scale_radius(2));
            }
        }
    }
}
