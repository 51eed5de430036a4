//! Coherent collections of balls and planes: assembly from a cloud, the
//! coherence conditions, one-sided flatness and lower regularity checks.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{fit_plane, LocalSample, Objective};
use crate::cloud::PointCloud;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{plane_dist, scale_radius, unit_ball_volume, AffinePlane, Point, PlaneRecord};
use crate::net::{MultiscaleNet, NetRecord};

/// Largest admissible flatness budget unless configured otherwise.
pub const DEFAULT_EPS_MAX: f64 = 0.02;
/// Fit radius multiplier `A` (planes are fitted on `B(x_{j,k}, A r_k)`).
pub const DEFAULT_FIT_RADIUS: f64 = 10.0;
/// Boundary samples per plane-distance evaluation during validation.
pub const DEFAULT_CHECK_SAMPLES: usize = 64;

/// Assembly parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcbpParams {
    pub eps: f64,
    pub eps_max: f64,
    pub fit_radius: f64,
    pub check_samples: usize,
}

impl CcbpParams {
    pub fn new(eps: f64) -> Self {
        CcbpParams {
            eps,
            eps_max: DEFAULT_EPS_MAX,
            fit_radius: DEFAULT_FIT_RADIUS,
            check_samples: DEFAULT_CHECK_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= self.eps_max) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, {}], got {}",
                self.eps_max, self.eps
            )));
        }
        if !(self.fit_radius >= 1.0 && self.fit_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "fit radius multiplier must be at least 1, got {}",
                self.fit_radius
            )));
        }
        if self.check_samples < 2 {
            return Err(Error::InvalidParameter("need at least 2 plane samples".into()));
        }
        Ok(())
    }
}

/// Balls `B_{j,k}`, planes `P_{j,k}` through their centers, and the reference plane `Σ_0`.
#[derive(Debug, Clone)]
pub struct Ccbp {
    net: MultiscaleNet,
    planes: Vec<Vec<OnceLock<Slot>>>,
    sigma0: AffinePlane,
    params: CcbpParams,
    /// Cloud for planes not yet fitted.
    source: Option<Arc<PointCloud>>,
}

#[derive(Debug, Clone)]
struct Slot {
    plane: AffinePlane,
    inherited: bool,
}

/// Which coherence family a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    SameScale,
    Sigma0,
    CrossScale,
    InitialProximity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub k: usize,
    /// Net-local indices; for cross-scale pairs `j` lives at scale `k + 1`.
    pub i: usize,
    pub j: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub eps: f64,
    pub violations: Vec<Violation>,
    pub max_defect: f64,
    /// Max defect per condition family, in the order same-scale, Σ_0, cross-scale, proximity.
    pub family_max: [f64; 4],
    pub pairs_checked: usize,
}

impl CoherenceReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Serialized CCBP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcbpRecord {
    pub params: CcbpParams,
    pub radii: Vec<f64>,
    pub net: NetRecord,
    pub sigma0: PlaneRecord,
    pub planes: Vec<Vec<PlaneRecord>>,
    pub inherited: Vec<Vec<bool>>,
}

impl Ccbp {
    /// Sup-fits a plane on `cloud ∩ B(x_{j,k}, A r_k)` for every net point and
    /// re-bases it through `x_{j,k}`; `Σ_0` is the sup fit on `B(barycenter, 10)`.
    ///
    /// A degenerate ball inherits the plane of the nearest net point one scale up.
    pub fn assemble(cloud: &PointCloud, net: MultiscaleNet, params: CcbpParams) -> Result<Self> {
        let ccbp = Ccbp::assemble_lazy(Arc::new(cloud.clone()), net, params)?;
        for k in 0..=ccbp.max_scale() {
            (0..ccbp.net.len(k)).into_par_iter().for_each(|j| {
                ccbp.slot(k, j);
            });
        }
        Ok(ccbp)
    }

    /// As [`Ccbp::assemble`], but planes below scale 0 are fitted on first use.
    ///
    /// Flows and coefficients only consult planes near the points they visit,
    /// so this avoids fitting every ball of a large cloud.
    pub fn assemble_lazy(cloud: Arc<PointCloud>, net: MultiscaleNet, params: CcbpParams) -> Result<Self> {
        params.validate()?;
        check_dim(cloud.n(), net.n())?;
        let d = cloud.d();
        let bary = cloud.barycenter();
        let sample = LocalSample::from_cloud(&cloud, bary.as_slice(), 10.0);
        let fit = fit_plane(&sample, bary.as_slice(), 10.0, d, Objective::Sup)?;
        if fit.degenerate {
            return Err(Error::Degenerate(format!(
                "the cloud does not determine a {d}-plane at scale 0"
            )));
        }
        let planes = (0..=net.max_scale())
            .map(|k| (0..net.len(k)).map(|_| OnceLock::new()).collect())
            .collect();
        let ccbp = Ccbp {
            net,
            planes,
            sigma0: fit.plane,
            params,
            source: Some(cloud),
        };
        for j in 0..ccbp.net.len(0) {
            let x = ccbp.net.center(0, j);
            match ccbp.fit_at(0, x)? {
                Some(p) => {
                    let _ = ccbp.planes[0][j].set(Slot { plane: p, inherited: false });
                }
                None => {
                    return Err(Error::Degenerate(format!(
                        "net point {j} at scale 0 does not determine a {d}-plane"
                    )))
                }
            }
        }
        Ok(ccbp)
    }

    fn fit_at(&self, k: usize, x: &[f64]) -> Result<Option<AffinePlane>> {
        let cloud = self.source.as_ref().expect("lazy planes need their cloud");
        let r = self.params.fit_radius * scale_radius(k);
        let sample = LocalSample::from_cloud(cloud, x, r);
        let fit = fit_plane(&sample, x, r, cloud.d(), Objective::Sup)?;
        if fit.degenerate {
            Ok(None)
        } else {
            fit.plane.rebased(Point::from_column_slice(x)).map(Some)
        }
    }

    fn slot(&self, k: usize, j: usize) -> &Slot {
        self.planes[k][j].get_or_init(|| {
            let x = self.net.center(k, j);
            match self.fit_at(k, x) {
                Ok(Some(plane)) => Slot { plane, inherited: false },
                _ => {
                    // k > 0 here: scale 0 is filled at construction.
                    let (parent, _) = self.net.nearest(k - 1, x);
                    let plane = self
                        .plane(k - 1, parent)
                        .rebased(Point::from_column_slice(x))
                        .expect("dimensions agree");
                    Slot { plane, inherited: true }
                }
            }
        })
    }

    /// Builds a CCBP from explicit planes; each plane is re-based through its net point.
    pub fn from_parts(
        net: MultiscaleNet,
        planes: Vec<Vec<AffinePlane>>,
        sigma0: AffinePlane,
        params: CcbpParams,
    ) -> Result<Self> {
        params.validate()?;
        if planes.len() != net.max_scale() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} plane levels for {} net scales",
                planes.len(),
                net.max_scale() + 1
            )));
        }
        let mut rebased = Vec::with_capacity(planes.len());
        for (k, level) in planes.into_iter().enumerate() {
            if level.len() != net.len(k) {
                return Err(Error::InvalidParameter(format!(
                    "{} planes for {} net points at scale {k}",
                    level.len(),
                    net.len(k)
                )));
            }
            let mut out = Vec::with_capacity(level.len());
            for (j, p) in level.into_iter().enumerate() {
                if p.d() != sigma0.d() || p.n() != net.n() {
                    return Err(Error::DimensionMismatch {
                        expected: sigma0.d(),
                        found: p.d(),
                    });
                }
                let plane = p.rebased(Point::from_column_slice(net.center(k, j)))?;
                out.push(OnceLock::from(Slot { plane, inherited: false }));
            }
            rebased.push(out);
        }
        Ok(Ccbp {
            net,
            planes: rebased,
            sigma0,
            params,
            source: None,
        })
    }

    pub fn from_record(cloud: &PointCloud, record: CcbpRecord) -> Result<Self> {
        let net = MultiscaleNet::from_record(cloud, &record.net)?;
        let sigma0 = AffinePlane::try_from(record.sigma0)?;
        let planes = record
            .planes
            .into_iter()
            .map(|l| l.into_iter().map(AffinePlane::try_from).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut ccbp = Ccbp::from_parts(net, planes, sigma0, record.params)?;
        if record.inherited.len() == ccbp.planes.len() {
            for (level, flags) in ccbp.planes.iter_mut().zip(record.inherited) {
                for (slot, flag) in level.iter_mut().zip(flags) {
                    if let Some(s) = slot.get_mut() {
                        s.inherited = flag;
                    }
                }
            }
        }
        Ok(ccbp)
    }

    /// Serializes the collection, fitting any plane not yet fitted.
    pub fn to_record(&self) -> CcbpRecord {
        let mut planes = Vec::new();
        let mut inherited = Vec::new();
        for k in 0..=self.max_scale() {
            let slots: Vec<&Slot> = (0..self.net.len(k)).map(|j| self.slot(k, j)).collect();
            planes.push(slots.iter().map(|s| PlaneRecord::from(s.plane.clone())).collect());
            inherited.push(slots.iter().map(|s| s.inherited).collect());
        }
        CcbpRecord {
            params: self.params,
            radii: (0..=self.max_scale()).map(scale_radius).collect(),
            net: self.net.to_record(),
            sigma0: self.sigma0.clone().into(),
            planes,
            inherited,
        }
    }

    pub fn net(&self) -> &MultiscaleNet {
        &self.net
    }

    pub fn sigma0(&self) -> &AffinePlane {
        &self.sigma0
    }

    pub fn eps(&self) -> f64 {
        self.params.eps
    }

    pub fn params(&self) -> &CcbpParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    pub fn d(&self) -> usize {
        self.sigma0.d()
    }

    pub fn max_scale(&self) -> usize {
        self.net.max_scale()
    }

    /// `P_{j,k}`.
    pub fn plane(&self, k: usize, j: usize) -> &AffinePlane {
        &self.slot(k, j).plane
    }

    pub fn is_inherited(&self, k: usize, j: usize) -> bool {
        self.slot(k, j).inherited
    }

    /// Number of planes fitted so far (all of them after an eager assembly).
    pub fn fitted_count(&self) -> usize {
        self.planes.iter().flatten().filter(|s| s.get().is_some()).count()
    }

    /// Replaces one plane (re-based through its net point); used to inject defects.
    pub fn set_plane(&mut self, k: usize, j: usize, plane: AffinePlane) -> Result<()> {
        let x = Point::from_column_slice(self.net.center(k, j));
        let plane = plane.rebased(x)?;
        self.planes[k][j] = OnceLock::from(Slot { plane, inherited: false });
        Ok(())
    }

    /// Same collection with a different budget.
    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        let mut params = self.params;
        params.eps = eps;
        if eps > params.eps_max {
            params.eps_max = eps;
        }
        if eps > 0.0 {
            params.validate()?;
        }
        self.params = params;
        Ok(self)
    }

    /// Measures every coherence condition; pairs whose defect exceeds `eps` are violations.
    pub fn validate(&self) -> CoherenceReport {
        self.validate_with_budget(self.params.eps)
    }

    pub fn validate_with_budget(&self, eps: f64) -> CoherenceReport {
        let m = self.params.check_samples;
        let net = &self.net;
        let mut measured: Vec<Violation> = Vec::new();
        let mut pairs = 0usize;
        let dist_or_max = |x: &[f64], r: f64, p: &AffinePlane, q: &AffinePlane| {
            plane_dist(&Point::from_column_slice(x), r, p, q, m).unwrap_or(2.0)
        };
        for k in 0..=self.max_scale() {
            let r = scale_radius(k);
            let level: Vec<Vec<Violation>> = (0..net.len(k))
                .into_par_iter()
                .map(|j| {
                    let xj = net.center(k, j);
                    let mut out = Vec::new();
                    for i in net.within(k, xj, 100.0 * r) {
                        if i == j {
                            continue;
                        }
                        let v = dist_or_max(xj, 100.0 * r, self.plane(k, i), self.plane(k, j));
                        out.push(Violation {
                            condition: Condition::SameScale,
                            k,
                            i,
                            j: Some(j),
                            value: v,
                        });
                    }
                    if k < self.max_scale() {
                        for jj in net.within(k + 1, xj, 2.0 * r) {
                            let v = dist_or_max(xj, 20.0 * r, self.plane(k, j), self.plane(k + 1, jj));
                            out.push(Violation {
                                condition: Condition::CrossScale,
                                k,
                                i: j,
                                j: Some(jj),
                                value: v,
                            });
                        }
                    }
                    if k == 0 {
                        let v = dist_or_max(xj, 100.0, self.plane(0, j), &self.sigma0);
                        out.push(Violation {
                            condition: Condition::Sigma0,
                            k,
                            i: j,
                            j: None,
                            value: v,
                        });
                        out.push(Violation {
                            condition: Condition::InitialProximity,
                            k,
                            i: j,
                            j: None,
                            value: self.sigma0.distance(xj),
                        });
                    }
                    out
                })
                .collect();
            for v in level {
                pairs += v.len();
                measured.extend(v);
            }
        }
        let mut family_max = [0.0f64; 4];
        for v in &measured {
            let slot = match v.condition {
                Condition::SameScale => 0,
                Condition::Sigma0 => 1,
                Condition::CrossScale => 2,
                Condition::InitialProximity => 3,
            };
            family_max[slot] = family_max[slot].max(v.value);
        }
        let max_defect = family_max.iter().copied().fold(0.0, f64::max);
        let violations = measured.into_iter().filter(|v| v.value > eps).collect();
        CoherenceReport {
            eps,
            violations,
            max_defect,
            family_max,
            pairs_checked: pairs,
        }
    }
}

/// One-sided flatness defects at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFlatness {
    pub k: usize,
    /// `sup dist(y, P(x, r_k)) / r_k` over `y ∈ E ∩ B(x, r_k)`, maximized over net points.
    pub containment: f64,
    /// `d_{x, r_k}(P(x, r_k), P(x, r_{k-1}))`.
    pub across_scales: f64,
    /// `d_{x, 100 r_k}(P(x, r_k), P(y, r_k))` for `|x - y| ≤ 100 r_k`.
    pub across_points: f64,
    pub balls: usize,
}

/// Result of the one-sided Reifenberg flatness check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedReport {
    pub eps: f64,
    pub scales: Vec<ScaleFlatness>,
    pub max_defect: f64,
    pub passes: bool,
    /// Finest scale examined.
    pub finest_k: usize,
}

/// Checks the one-sided flatness conditions at the net points of scales
/// `0..=min(K, finest resolved scale)`, with `P(x, r)` the sup-fitted plane
/// on `E ∩ B(x, r)` (inherited from the next coarser radius when degenerate).
pub fn check_one_sided_flat(cloud: &PointCloud, eps: f64, max_k: usize) -> Result<OneSidedReport> {
    check_one_sided_flat_capped(cloud, eps, max_k, usize::MAX)
}

/// [`check_one_sided_flat`] examining at most `cap` net points per scale
/// (an evenly strided subset); the across-points condition compares pairs
/// within that subset.
pub fn check_one_sided_flat_capped(cloud: &PointCloud, eps: f64, max_k: usize, cap: usize) -> Result<OneSidedReport> {
    if cap == 0 {
        return Err(Error::InvalidParameter("point cap must be positive".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be nonnegative, got {eps}")));
    }
    let d = cloud.d();
    let finest = max_k.min(cloud.finest_resolved_scale());
    let net = crate::net::build_net(cloud, finest);
    let fit_at = |x: &[f64], r: f64| -> Result<Option<(AffinePlane, f64)>> {
        let sample = LocalSample::from_cloud(cloud, x, r);
        let fit = fit_plane(&sample, x, r, d, Objective::Sup)?;
        Ok((!fit.degenerate).then_some((fit.plane, fit.value)))
    };
    let mut scales = Vec::new();
    for k in 0..=finest {
        let r = scale_radius(k);
        let stride = net.len(k).div_ceil(cap).max(1);
        let chosen: Vec<usize> = (0..net.len(k)).step_by(stride).collect();
        let slot_of: std::collections::HashMap<usize, usize> =
            chosen.iter().enumerate().map(|(s, &j)| (j, s)).collect();
        let per_point: Vec<Result<(AffinePlane, f64, f64)>> = chosen
            .par_iter()
            .map(|&j| {
                let x = net.center(k, j);
                let xp = Point::from_column_slice(x);
                let coarse = match fit_at(x, 10.0 * r)? {
                    Some((p, _)) => p,
                    None => AffinePlane::coordinate(xp.clone(), d)?,
                };
                let (fine, containment) = match fit_at(x, r)? {
                    Some(pv) => pv,
                    None => (coarse.rebased(xp.clone())?, 0.0),
                };
                let across = plane_dist(&xp, r, &fine, &coarse, DEFAULT_CHECK_SAMPLES).unwrap_or(2.0);
                Ok((fine, containment, across))
            })
            .collect();
        let per_point = per_point.into_iter().collect::<Result<Vec<_>>>()?;
        let containment = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
        let across_scales = per_point.iter().map(|p| p.2).fold(0.0, f64::max);
        let across_points = (0..chosen.len())
            .into_par_iter()
            .map(|s| {
                let j = chosen[s];
                let x = Point::from_column_slice(net.center(k, j));
                net.within(k, x.as_slice(), 100.0 * r)
                    .into_iter()
                    .filter(|&i| i > j)
                    .filter_map(|i| slot_of.get(&i).copied())
                    .map(|t| {
                        plane_dist(&x, 100.0 * r, &per_point[s].0, &per_point[t].0, DEFAULT_CHECK_SAMPLES)
                            .unwrap_or(2.0)
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        scales.push(ScaleFlatness {
            k,
            containment,
            across_scales,
            across_points,
            balls: chosen.len(),
        });
    }
    let max_defect = scales
        .iter()
        .map(|s| s.containment.max(s.across_scales).max(s.across_points))
        .fold(0.0, f64::max);
    Ok(OneSidedReport {
        eps,
        scales,
        max_defect,
        passes: max_defect <= eps,
        finest_k: finest,
    })
}

/// Lower regularity `μ(B(x, r)) / r^d` against `(1 - Cε) ω_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerRegularity {
    pub ratio: f64,
    pub threshold: f64,
    /// Raised when the ratio falls below the threshold (informational).
    pub below: bool,
}

pub const DEFAULT_LOWER_REGULARITY_C: f64 = 10.0;

pub fn lower_regularity(cloud: &PointCloud, x: &[f64], r: f64, eps: f64, c: f64) -> Result<LowerRegularity> {
    crate::error::check_dim(cloud.n(), x.len())?;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let d = cloud.d();
    let ratio = cloud.ball_mass(x, r) / r.powi(d as i32);
    let threshold = (1.0 - c * eps) * unit_ball_volume(d);
    Ok(LowerRegularity {
        ratio,
        threshold,
        below: ratio < threshold,
    })
}
