//! β numbers, densities and Jones square functions of point clouds.

mod coeffs;
mod fit;

pub use coeffs::{epsilon_k, gamma_k, jones_gamma, BallReading, GammaRecord};
pub use fit::{fit_plane, objective_value, LocalSample, Objective, PlaneFit};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{scale_radius, AffinePlane};

/// `β_p(x, r_k)` with the minimizing plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRecord {
    pub x: Vec<f64>,
    pub k: usize,
    pub objective: Objective,
    pub value: f64,
    /// Witness plane; absent when the ball holds no sample point.
    pub plane: Option<AffinePlane>,
}

/// `β_p(x, r_k)` of the cloud; zero on an empty ball.
pub fn beta(cloud: &PointCloud, x: &[f64], k: usize, objective: Objective) -> Result<BetaRecord> {
    check_dim(cloud.n(), x.len())?;
    let r = scale_radius(k);
    let sample = LocalSample::from_cloud(cloud, x, r);
    let (value, plane) = if sample.is_empty() {
        (0.0, None)
    } else {
        let fit = fit_plane(&sample, x, r, cloud.d(), objective)?;
        (if fit.degenerate { 0.0 } else { fit.value }, Some(fit.plane))
    };
    Ok(BetaRecord {
        x: x.to_vec(),
        k,
        objective,
        value,
        plane,
    })
}

/// Both sides of `β_1 ≤ (μ(B)/r^d)^{1/2} β_2` at one ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaComparison {
    /// Optimal L1 value.
    pub beta1: f64,
    /// Optimal L2 value.
    pub beta2: f64,
    /// L1 value evaluated at the L2-optimal plane.
    pub beta1_at_l2_plane: f64,
    /// `μ(B(x, r_k)) / r_k^d`.
    pub mass_ratio: f64,
    /// `(μ(B)/r^d)^{1/2} β_2`.
    pub bound: f64,
}

impl BetaComparison {
    /// The inequality evaluated against the common (L2-optimal) witness plane.
    pub fn holds(&self, tol: f64) -> bool {
        self.beta1_at_l2_plane <= self.bound + tol && self.beta1 <= self.bound + tol
    }
}

pub fn beta_compare(cloud: &PointCloud, x: &[f64], k: usize) -> Result<BetaComparison> {
    check_dim(cloud.n(), x.len())?;
    let r = scale_radius(k);
    let d = cloud.d();
    let sample = LocalSample::from_cloud(cloud, x, r);
    if sample.is_empty() {
        return Err(Error::Degenerate(format!("empty ball at scale {k}")));
    }
    let l1 = fit_plane(&sample, x, r, d, Objective::L1)?;
    let l2 = fit_plane(&sample, x, r, d, Objective::L2)?;
    let beta1_at_l2_plane = objective_value(&sample, x, r, d, &l2.plane, Objective::L1)?;
    let mass_ratio = sample.mass() / r.powi(d as i32);
    Ok(BetaComparison {
        beta1: l1.value.min(beta1_at_l2_plane),
        beta2: l2.value,
        beta1_at_l2_plane,
        mass_ratio,
        bound: mass_ratio.sqrt() * l2.value,
    })
}

/// Density ratios `μ(B(x, r_k)) / r_k^d` over a range of scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub ratios: Vec<(usize, f64)>,
    /// Max over the finest five computed scales (limsup proxy).
    pub proxy: f64,
    /// The finest ratios keep growing by at least a factor 10 overall.
    pub divergent: bool,
}

pub fn upper_density(cloud: &PointCloud, x: &[f64], scales: &[usize]) -> Result<DensityProfile> {
    check_dim(cloud.n(), x.len())?;
    let d = cloud.d() as i32;
    let mut ks = scales.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let ratios: Vec<(usize, f64)> = ks
        .iter()
        .map(|&k| {
            let r = scale_radius(k);
            (k, cloud.ball_mass(x, r) / r.powi(d))
        })
        .collect();
    let tail = &ratios[ratios.len().saturating_sub(5)..];
    let proxy = tail.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let divergent = tail.len() >= 2
        && tail.windows(2).all(|w| w[1].1 >= w[0].1)
        && tail[0].1 > 0.0
        && tail[tail.len() - 1].1 >= 10.0 * tail[0].1;
    Ok(DensityProfile {
        ratios,
        proxy,
        divergent,
    })
}

/// One scale of a Jones sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JonesTerm {
    pub k: usize,
    pub beta: f64,
    pub term: f64,
}

/// Partial Jones square function at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JonesRecord {
    pub x: Vec<f64>,
    pub alpha: f64,
    pub objective: Objective,
    pub log_gamma: Option<f64>,
    pub terms: Vec<JonesTerm>,
    /// Sum of the terms.
    pub value: f64,
    /// Magnitude of the finest term, a proxy for the neglected tail.
    pub tail: f64,
    /// Scale requested by the caller.
    pub requested_k: usize,
    /// Finest scale actually summed (bounded by the sample spacing).
    pub finest_k: usize,
}

/// Checks `α ∈ (0, 1]` and, at `α = 1`, a log correction `γ > 1/2`.
pub fn check_exponents(alpha: f64, log_gamma: Option<f64>) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    match log_gamma {
        None if alpha == 1.0 => Err(Error::InvalidParameter(
            "alpha = 1 requires the log-corrected sum: pass gamma > 1/2".into(),
        )),
        Some(g) if alpha == 1.0 && g <= 0.5 => Err(Error::InvalidParameter(format!(
            "alpha = 1 requires gamma > 1/2, got {g}"
        ))),
        Some(g) if !(g > 0.0 && g.is_finite()) => Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {g}"
        ))),
        _ => Ok(()),
    }
}

/// Scale weight `r_k^{-2α}`, or `(r_k / log(1/r_k)^γ)^{-2α}` with a log correction
/// (undefined at `k = 0`, where `None` is returned).
pub fn jones_weight(k: usize, alpha: f64, log_gamma: Option<f64>) -> Option<f64> {
    let r = scale_radius(k);
    match log_gamma {
        None => Some(r.powf(-2.0 * alpha)),
        Some(_) if k == 0 => None,
        Some(g) => {
            let eff = r / (1.0 / r).ln().powf(g);
            Some(eff.powf(-2.0 * alpha))
        }
    }
}

/// Assembles a Jones record from per-scale β values `(k, β)`.
pub fn jones_from_betas(
    x: &[f64],
    betas: &[(usize, f64)],
    alpha: f64,
    objective: Objective,
    log_gamma: Option<f64>,
    requested_k: usize,
) -> Result<JonesRecord> {
    check_exponents(alpha, log_gamma)?;
    let terms: Vec<JonesTerm> = betas
        .iter()
        .filter_map(|&(k, b)| {
            jones_weight(k, alpha, log_gamma).map(|w| JonesTerm {
                k,
                beta: b,
                term: b * b * w,
            })
        })
        .collect();
    let value = terms.iter().map(|t| t.term).sum();
    let tail = terms.last().map_or(0.0, |t| t.term);
    let finest_k = betas.iter().map(|b| b.0).max().unwrap_or(0);
    Ok(JonesRecord {
        x: x.to_vec(),
        alpha,
        objective,
        log_gamma,
        terms,
        value,
        tail,
        requested_k,
        finest_k,
    })
}

/// Partial sum `Σ_{k ≤ K} β_p(x, r_k)^2 / r_k^{2α}` (or its log-corrected form),
/// truncated at the finest scale resolved by the sample spacing.
pub fn jones(
    cloud: &PointCloud,
    x: &[f64],
    alpha: f64,
    objective: Objective,
    max_k: usize,
    log_gamma: Option<f64>,
) -> Result<JonesRecord> {
    check_exponents(alpha, log_gamma)?;
    let finest = max_k.min(cloud.finest_resolved_scale());
    let betas = (0..=finest)
        .map(|k| beta(cloud, x, k, objective).map(|b| (k, b.value)))
        .collect::<Result<Vec<_>>>()?;
    jones_from_betas(x, &betas, alpha, objective, log_gamma, max_k)
}
