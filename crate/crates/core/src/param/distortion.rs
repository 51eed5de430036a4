//! Empirical constants in the per-scale distortion bounds of `σ_k` along flow traces.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{epsilon_k, BallReading};
use crate::ccbp::Ccbp;
use crate::error::Result;
use crate::geometry::{scale_radius, Point};

use super::sigma::sigma_jet;

/// Which bound a ratio measures (left side over the right side without its constant).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// `|Dσ_k(y) v - v| ≤ C ε |v|`.
    TangentDeviation,
    /// `||Dσ_k(y) v| - 1| ≤ C ε_k(y)²` for unit `v` tangent to `Σ_k`.
    NormEps2,
    /// `|D²σ_k(y)| ≤ C ε_k(y) / r_k`, along `v`.
    SecondDerivative,
    /// `|D²σ_k(y) - 2 Dψ_k(y) Dπ^⊥_{j,k}| ≤ C ε / r_k`, along `v`.
    NormalPart,
}

pub const BOUNDS: [Bound; 4] = [
    Bound::TangentDeviation,
    Bound::NormEps2,
    Bound::SecondDerivative,
    Bound::NormalPart,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionRow {
    pub bound: Bound,
    pub k: usize,
    /// Max ratio over samples; 0/0 counts as 0.
    pub max_ratio: f64,
    /// Samples with a zero right side but nonzero left side (excluded from the max).
    pub unbounded: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub eps: f64,
    pub rows: Vec<DistortionRow>,
    /// Largest `ε_k` seen per scale.
    pub eps_k_max: Vec<f64>,
}

impl DistortionReport {
    pub fn row(&self, bound: Bound, k: usize) -> Option<&DistortionRow> {
        self.rows.iter().find(|r| r.bound == bound && r.k == k)
    }
}

/// One sample's left sides and right sides at one scale.
struct Measured {
    lhs: [f64; 4],
    rhs: [f64; 4],
    eps_k: f64,
}

/// Measures the bounds at `y = f_k(z)`, `v = Df_k(z) u / |Df_k(z) u|` for each sample `z ∈ Σ_0`
/// and `k < K`, with `u` the first frame vector of `Σ_0`.
pub fn distortion_report(ccbp: &Ccbp, samples: &[Point], k_max: usize) -> Result<DistortionReport> {
    let dir = ccbp.sigma0().frame_vector(0);
    let eps = ccbp.eps();
    let per_sample: Vec<Vec<Measured>> = samples
        .par_iter()
        .map(|z| {
            let mut y = z.clone();
            let mut v = dir.clone();
            let mut out = Vec::with_capacity(k_max);
            for k in 0..k_max {
                let r = scale_radius(k);
                let jet = sigma_jet(ccbp, y.as_slice(), k)?;
                let unit = &v / v.norm();
                let eps_k = epsilon_k(ccbp, y.as_slice(), k, BallReading::ScaleL)?;
                let image = &jet.jac * &unit;
                let second = jet.hess_apply(&unit, &unit);
                let normal_part = if jet.is_identity() {
                    0.0
                } else {
                    let (j, _) = ccbp.net().nearest(k, y.as_slice());
                    let perp = ccbp.plane(k, j).normal_project(&unit)?;
                    let model: DVector<f64> = perp * (2.0 * jet.psi_grad.dot(&unit));
                    (&second - model).norm()
                };
                out.push(Measured {
                    lhs: [(&image - &unit).norm(), (image.norm() - 1.0).abs(), second.norm() * r, normal_part * r],
                    rhs: [eps, eps_k * eps_k, eps_k, eps],
                    eps_k,
                });
                v = &jet.jac * v;
                y = jet.value;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut eps_k_max = vec![0.0f64; k_max];
    for k in 0..k_max {
        for (b, bound) in BOUNDS.iter().enumerate() {
            let mut max_ratio = 0.0f64;
            let mut unbounded = 0;
            for s in &per_sample {
                let m = &s[k];
                eps_k_max[k] = eps_k_max[k].max(m.eps_k);
                if m.rhs[b] > 0.0 {
                    max_ratio = max_ratio.max(m.lhs[b] / m.rhs[b]);
                } else if m.lhs[b] > 1e-13 {
                    unbounded += 1;
                }
            }
            rows.push(DistortionRow {
                bound: *bound,
                k,
                max_ratio,
                unbounded,
                samples: per_sample.len(),
            });
        }
    }
    Ok(DistortionReport { eps, rows, eps_k_max })
}
