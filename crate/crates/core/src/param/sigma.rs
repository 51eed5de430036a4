//! The per-scale maps `σ_k(y) = ψ_k(y) y + Σ_j θ_{j,k}(y) π_{j,k}(y)` and their first two derivatives.

use nalgebra::{DMatrix, DVector};

use crate::ccbp::Ccbp;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{scale_radius, Point};
use crate::partition::{partition_jet, PartitionJet};

/// One active term `θ_j (π_j(y) - y)` of `σ_k(y) - y`.
#[derive(Debug, Clone)]
struct Term {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    /// `Dπ_j - I = -P_j^⊥`.
    tangent_minus_identity: DMatrix<f64>,
    /// `π_j(y) - y`.
    offset: DVector<f64>,
}

/// `σ_k(y)`, `Dσ_k(y)` and the bilinear action of `D²σ_k(y)`.
#[derive(Debug, Clone)]
pub struct SigmaJet {
    pub k: usize,
    pub y: Point,
    pub value: Point,
    pub jac: DMatrix<f64>,
    /// `∇ψ_k(y)`.
    pub psi_grad: DVector<f64>,
    pub active: Vec<usize>,
    terms: Vec<Term>,
}

impl SigmaJet {
    /// `D²σ_k(y)[u, v] = Σ_j (∇θ_j·v)(Dπ_j - I)u + (∇θ_j·u)(Dπ_j - I)v + (uᵀ D²θ_j v)(π_j(y) - y)`.
    pub fn hess_apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.y.len());
        for t in &self.terms {
            out += &t.tangent_minus_identity * u * t.grad.dot(v);
            out += &t.tangent_minus_identity * v * t.grad.dot(u);
            out += &t.offset * (u.dot(&(&t.hess * v)));
        }
        out
    }

    /// Whether `y` lies outside `V_k^{10}` (σ_k is the identity near `y`).
    pub fn is_identity(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn displacement(&self) -> f64 {
        (&self.value - &self.y).norm()
    }
}

/// Evaluates `σ_k` and its derivatives at `y`.
///
/// Uses `ψ_k = 1 - Σ_j θ_{j,k}`, so `σ_k(y) = y + Σ_j θ_{j,k}(y)(π_{j,k}(y) - y)`.
pub fn sigma_jet(ccbp: &Ccbp, y: &[f64], k: usize) -> Result<SigmaJet> {
    check_dim(ccbp.n(), y.len())?;
    if k > ccbp.max_scale() {
        return Err(Error::MissingPlane { scale: k });
    }
    let n = y.len();
    let part: PartitionJet = partition_jet(ccbp.net(), y, k)?;
    let yp = Point::from_column_slice(y);
    let mut value = yp.clone();
    let mut jac = DMatrix::identity(n, n);
    let mut terms = Vec::with_capacity(part.active.len());
    for (jet, &j) in part.theta.iter().zip(&part.active) {
        let plane = ccbp.plane(k, j);
        let proj = plane.project(&yp)?;
        let offset = proj - &yp;
        let tangent_minus_identity = plane.projector() - DMatrix::identity(n, n);
        value += &offset * jet.value;
        jac += &tangent_minus_identity * jet.value + &offset * jet.grad.transpose();
        terms.push(Term {
            grad: jet.grad.clone(),
            hess: jet.hess.clone(),
            tangent_minus_identity,
            offset,
        });
    }
    debug_assert!((&value - &yp).norm() <= 10.0 * scale_radius(k) * (1.0 + 1e-12));
    Ok(SigmaJet {
        k,
        y: yp,
        value,
        jac,
        psi_grad: part.psi.grad,
        active: part.active,
        terms,
    })
}

/// `σ_k(y)` alone.
pub fn sigma(ccbp: &Ccbp, y: &[f64], k: usize) -> Result<Point> {
    sigma_jet(ccbp, y, k).map(|j| j.value)
}
