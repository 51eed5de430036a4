//! The composed maps `f_0 = id`, `f_{k+1} = σ_k ∘ f_k` on `Σ_0`, with chained
//! first derivatives and the directional second derivative `A_k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ccbp::Ccbp;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{scale_radius, Point};

use super::sigma::sigma_jet;

/// Radius of the ball about the origin in which `Σ_0` points are accepted.
pub const DOMAIN_RADIUS: f64 = 2.0;
const ON_PLANE_TOL: f64 = 1e-9;

/// `f_K` at one point of `Σ_0` with its derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowJet {
    pub z: Vec<f64>,
    pub k: usize,
    pub direction: Vec<f64>,
    /// `z_0 = z, z_1 = f_1(z), ..., z_K = f_K(z)`.
    pub trace: Vec<Vec<f64>>,
    /// `Df_K(z) e_i` for the frame vectors `e_i` of `Σ_0`, column-major `n × d`.
    pub frame: Vec<Vec<f64>>,
    /// `Df_K(z) u`.
    pub derivative: Vec<f64>,
    /// `A_K = d²/dt² f_K(z + t u)` at `t = 0`.
    pub dir2: Vec<f64>,
    /// `‖f - f_K‖_∞ ≤ Σ_{k ≥ K} 10 r_k = (100/9) r_K`.
    pub tail_bound: f64,
}

impl FlowJet {
    pub fn value(&self) -> &[f64] {
        self.trace.last().expect("trace holds z_0")
    }

    pub fn frame_matrix(&self) -> DMatrix<f64> {
        let n = self.z.len();
        DMatrix::from_iterator(n, self.frame.len(), self.frame.iter().flatten().copied())
    }

    /// Largest single-step displacement `|z_{k+1} - z_k|` relative to `10 r_k`.
    pub fn step_ratios(&self) -> Vec<f64> {
        self.trace
            .windows(2)
            .enumerate()
            .map(|(k, w)| crate::geometry::dist(&w[0], &w[1]) / (10.0 * scale_radius(k)))
            .collect()
    }
}

pub fn tail_bound(k: usize) -> f64 {
    100.0 / 9.0 * scale_radius(k)
}

fn check_domain(ccbp: &Ccbp, z: &[f64], k: usize) -> Result<()> {
    check_dim(ccbp.n(), z.len())?;
    if k > ccbp.max_scale() {
        return Err(Error::MissingPlane { scale: k });
    }
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > DOMAIN_RADIUS {
        return Err(Error::InvalidParameter(format!(
            "flow start |z| = {norm} lies outside B(0, {DOMAIN_RADIUS})"
        )));
    }
    let off = ccbp.sigma0().distance(z);
    if off > ON_PLANE_TOL * norm.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "flow start lies {off:e} off the reference plane"
        )));
    }
    Ok(())
}

/// Runs `f_K` from `z ∈ Σ_0` along the tangent direction `u`.
pub fn flow(ccbp: &Ccbp, z: &[f64], k_max: usize, direction: &[f64]) -> Result<FlowJet> {
    check_domain(ccbp, z, k_max)?;
    check_dim(ccbp.n(), direction.len())?;
    let u = DVector::from_column_slice(direction);
    let sigma0 = ccbp.sigma0();
    if sigma0.normal_project(&u)?.norm() > ON_PLANE_TOL * u.norm().max(1.0) {
        return Err(Error::InvalidParameter("flow direction is not tangent to the reference plane".into()));
    }
    let n = z.len();
    let mut y = Point::from_column_slice(z);
    let mut frame = sigma0.frame().clone();
    let mut derivative = u;
    let mut dir2 = DVector::zeros(n);
    let mut trace = vec![z.to_vec()];
    for k in 0..k_max {
        let jet = sigma_jet(ccbp, y.as_slice(), k)?;
        if jet.is_identity() {
            trace.push(y.as_slice().to_vec());
            continue;
        }
        dir2 = jet.hess_apply(&derivative, &derivative) + &jet.jac * dir2;
        derivative = &jet.jac * derivative;
        frame = &jet.jac * frame;
        y = jet.value;
        trace.push(y.as_slice().to_vec());
    }
    Ok(FlowJet {
        z: z.to_vec(),
        k: k_max,
        direction: direction.to_vec(),
        trace,
        frame: frame.column_iter().map(|c| c.iter().copied().collect()).collect(),
        derivative: derivative.as_slice().to_vec(),
        dir2: dir2.as_slice().to_vec(),
        tail_bound: tail_bound(k_max),
    })
}

/// `f_K(y)` for any `y` (no domain check), value only.
pub fn flow_map(ccbp: &Ccbp, y: &[f64], k_max: usize) -> Result<Point> {
    check_dim(ccbp.n(), y.len())?;
    let mut p = Point::from_column_slice(y);
    for k in 0..k_max {
        p = super::sigma::sigma(ccbp, p.as_slice(), k)?;
    }
    Ok(p)
}

/// The point of `Σ_0` with the given coordinates in its frame.
pub fn sigma0_point(ccbp: &Ccbp, coords: &[f64]) -> Result<Point> {
    ccbp.sigma0().point_at(&DVector::from_column_slice(coords))
}
