//! β-decay in, measured regularity out: flatness check, CCBP, the two Jones
//! sums, and Hölder fits of `Df_K` and of the inverse derivative.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::holder::{estimate_holder, HolderFit, HolderOptions};
use crate::beta::{beta, check_exponents, epsilon_k, jones_weight, BallReading, Objective};
use crate::ccbp::{check_one_sided_flat_capped, Ccbp, CcbpParams, OneSidedReport, DEFAULT_EPS_MAX, DEFAULT_FIT_RADIUS};
use crate::cloud::{Normalization, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{dist, scale_radius, Point};
use crate::net::build_net;
use crate::param::{flow, invert_with_tolerance, sigma};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Target exponent `α ∈ (0, 1]`.
    pub alpha: f64,
    /// Logarithmic correction `γ`, required (and `> 1/2`) when `α = 1`.
    pub log_gamma: Option<f64>,
    /// Depth `K`.
    pub max_k: usize,
    /// Flatness budget for the one-sided check and the CCBP.
    pub eps: f64,
    /// Plane fits use `B(x, A r_k)`.
    pub fit_radius: f64,
    /// Accepted `|η̂ - α|`; for `α = 1` the verdict is `η̂ ≥ 1 - tolerance`.
    pub tolerance: f64,
    /// Cloud points at which the β-based Jones sum is evaluated.
    pub beta_samples: usize,
    /// Base points on `Σ_0` for the forward fit (each carries dyadic satellites).
    pub base_points: usize,
    /// Base points reused for the inverse fit.
    pub inverse_bases: usize,
    /// Base points whose flow traces carry the ε-based Jones sum.
    pub eps_traces: usize,
    /// Net points examined per scale by the flatness check.
    pub flatness_cap: usize,
    /// Finite-difference step for the inverse derivative.
    pub inverse_step: f64,
    /// Lower end of the Hölder fit window; defaults to the larger of `10 r_K`
    /// and the median sample spacing.
    pub min_distance: Option<f64>,
    pub reading: BallReading,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: 0.5,
            log_gamma: None,
            max_k: 6,
            eps: 0.1,
            fit_radius: DEFAULT_FIT_RADIUS,
            tolerance: 0.1,
            beta_samples: 64,
            base_points: 48,
            inverse_bases: 16,
            eps_traces: 16,
            flatness_cap: 2000,
            inverse_step: 1e-7,
            min_distance: None,
            reading: BallReading::ScaleL,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        check_exponents(self.alpha, self.log_gamma)?;
        if !(self.eps > 0.0 && self.eps <= 0.1) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 0.1], got {}", self.eps)));
        }
        if !(self.fit_radius >= 1.0 && self.fit_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("fit radius multiplier must be at least 1, got {}", self.fit_radius)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if self.base_points < 2 || self.inverse_bases == 0 || self.eps_traces == 0 || self.beta_samples == 0 || self.flatness_cap == 0 {
            return Err(Error::InvalidParameter("sample counts must be positive (at least 2 base points)".into()));
        }
        if self.min_distance.is_some_and(|m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter("minimum fit distance must be positive".into()));
        }
        if !(self.inverse_step > 0.0 && self.inverse_step < 1e-2) {
            return Err(Error::InvalidParameter(format!("inverse step must lie in (0, 0.01), got {}", self.inverse_step)));
        }
        Ok(())
    }
}

/// Which map a Hölder fit describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Target {
    /// `z ↦ Df_K(z) u` on `Σ_0`.
    Derivative { direction: Vec<f64> },
    /// `x ↦ D(f_K^{-1} ∘ π)(x)` on the image, `π` the nearest-point projection.
    InverseDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictRule {
    /// `|η̂ - α| ≤ tolerance`.
    Exponent,
    /// `η̂ ≥ 1 - tolerance`.
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub rule: VerdictRule,
    pub prediction: f64,
    pub tolerance: f64,
    /// `|η̂ - α|`, absent when the values are identically constant.
    pub deviation: Option<f64>,
    pub pass: bool,
}

impl Verdict {
    fn judge(fit: &HolderFit, alpha: f64, log_corrected: bool, tolerance: f64) -> Verdict {
        let rule = if log_corrected { VerdictRule::Lipschitz } else { VerdictRule::Exponent };
        let deviation = fit.exponent.map(|e| (e - alpha).abs());
        let pass = match (fit.exponent, rule) {
            (None, _) => fit.identically_constant,
            (Some(e), VerdictRule::Exponent) => (e - alpha).abs() <= tolerance,
            (Some(e), VerdictRule::Lipschitz) => e >= 1.0 - tolerance,
        };
        Verdict {
            rule,
            prediction: alpha,
            tolerance,
            deviation,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub target: Target,
    pub fit: HolderFit,
    pub verdict: Verdict,
    /// Samples dropped because the inversion did not converge.
    pub failures: usize,
}

/// Sup over sample points of a truncated Jones sum, for every depth `0..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JonesSup {
    /// `partial[m] = sup_x Σ_{k ≤ m} term_k(x)`.
    pub partial: Vec<f64>,
    pub value: f64,
    pub samples: usize,
}

impl JonesSup {
    fn from_terms(rows: &[Vec<f64>], depth: usize) -> JonesSup {
        let mut partial = vec![0.0f64; depth + 1];
        for row in rows {
            let mut acc = 0.0;
            for (m, slot) in partial.iter_mut().enumerate() {
                acc += row.get(m).copied().unwrap_or(0.0);
                *slot = slot.max(acc);
            }
        }
        JonesSup {
            value: partial[depth],
            partial,
            samples: rows.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub normalization: Normalization,
    pub flatness: OneSidedReport,
    /// `sup_x Σ β_∞(x, r_k)² / r_k^{2α}` at cloud points.
    pub jones_beta: JonesSup,
    /// `sup_z Σ ε_k(f_k(z))² / r_k^{2α}` along flow traces.
    pub jones_eps: JonesSup,
    /// Largest β_∞ seen while evaluating `jones_beta`.
    pub max_beta: f64,
    /// `max |f_K(z) - z|` over the forward samples.
    pub max_displacement: f64,
    pub forward: RegularityReport,
    pub inverse: RegularityReport,
    /// Planes fitted by the lazy CCBP.
    pub planes_fitted: usize,
    /// Extra sample clusters centred on ψ transition bands (holes in the cloud).
    pub band_clusters: usize,
}

impl PipelineReport {
    pub fn passes(&self) -> bool {
        self.forward.verdict.pass && self.inverse.verdict.pass
    }
}

/// Increments below this are indistinguishable from rounding in `Df_K`.
const FORWARD_NOISE: f64 = 1e-10;
/// The inverse derivative is a finite difference with residual-limited accuracy.
const INVERSE_NOISE: f64 = 1e-6;
const INVERSE_RESIDUAL: f64 = 1e-14;
/// Fraction of the `Σ_0` extent trimmed from each side when placing base points.
const EDGE_TRIM: f64 = 0.15;
const EXTENT_SUBSAMPLE: usize = 20000;
/// Samples per scan line when locating ψ transition bands.
const BAND_SCAN_POINTS: usize = 1024;
/// Scan lines per Σ_0 axis when `d ≥ 2`.
const BAND_LINES: usize = 8;
const MAX_BAND_CLUSTERS: usize = 64;

/// Normalizes the cloud, checks one-sided flatness (aborting with the report on
/// failure), builds the lazy CCBP to depth `K`, measures both Jones sums and fits
/// the Hölder exponents of `Df_K` and of the inverse derivative.
pub fn predict_and_verify(cloud: &PointCloud, config: &PipelineConfig) -> Result<PipelineReport> {
    config.validate()?;
    let (cloud, normalization) = cloud.normalized();
    let k = config.max_k;
    let flatness = check_one_sided_flat_capped(&cloud, config.eps, k, config.flatness_cap)?;
    if !flatness.passes {
        return Err(Error::FlatnessAbort {
            max_defect: flatness.max_defect,
            eps: config.eps,
            report: Box::new(flatness),
        });
    }
    let cloud = Arc::new(cloud);
    let net = build_net(&cloud, k);
    let params = CcbpParams {
        eps_max: DEFAULT_EPS_MAX.max(config.eps),
        fit_radius: config.fit_radius,
        ..CcbpParams::new(config.eps)
    };
    let ccbp = Ccbp::assemble_lazy(Arc::clone(&cloud), net, params)?;
    let log_corrected = config.log_gamma.is_some();

    let (jones_beta, max_beta) = beta_sup(&cloud, config)?;

    let sigma0 = ccbp.sigma0();
    let d = sigma0.d();
    let u = sigma0.frame_vector(0);
    let (lo, hi) = sigma0_extent(&ccbp, &cloud)?;
    let width = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let delta_max = 0.25 * width;
    let delta_min = config
        .min_distance
        .map(|m| m * normalization.scale)
        .unwrap_or_else(|| (10.0 * scale_radius(k)).max(cloud.median_nn_spacing()));
    if !(delta_max > 8.0 * delta_min) {
        return Err(Error::Degenerate(format!(
            "Σ_0 extent {width:.3e} too small for the resolved scale window [{delta_min:.3e}, {delta_max:.3e}]"
        )));
    }
    let mut clusters = sample_clusters(config, &lo, &hi, delta_min, delta_max);
    let finest = k.min(cloud.finest_resolved_scale());
    let bands = band_crossings(&ccbp, &lo, &hi, finest, delta_min)?;
    let band_clusters = bands.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xb4d5);
    clusters.extend(bands.into_iter().map(|c| satellites(c, delta_min, delta_max, &mut rng)));
    // (cluster index, is base point, coordinates)
    let coords: Vec<(usize, bool, DVector<f64>)> = clusters
        .iter()
        .enumerate()
        .flat_map(|(b, cluster)| cluster.iter().enumerate().map(move |(s, c)| (b, s == 0, c.clone())))
        .collect();

    let jets = coords
        .par_iter()
        .map(|(_, _, c)| {
            let z = sigma0.point_at(c)?;
            flow(&ccbp, z.as_slice(), k, u.as_slice())
        })
        .collect::<Result<Vec<_>>>()?;
    let max_displacement = jets.iter().map(|j| dist(&j.z, j.value())).fold(0.0, f64::max);

    // ε-based sum along the traces of the base points.
    let eps_rows = jets
        .par_iter()
        .zip(&coords)
        .filter(|(_, (b, base, _))| *base && *b < config.eps_traces)
        .map(|(jet, _)| {
            (0..k)
                .map(|s| {
                    let e = epsilon_k(&ccbp, &jet.trace[s], s, config.reading)?;
                    Ok(jones_weight(s, config.alpha, config.log_gamma).map_or(0.0, |w| e * e * w))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let jones_eps = JonesSup::from_terms(&eps_rows, k.saturating_sub(1));

    let window = |noise: f64| HolderOptions {
        min_distance: delta_min,
        max_distance: delta_max,
        min_bin_pairs: 1,
        noise_floor: noise,
    };
    let forward_samples: Vec<(Vec<f64>, Vec<f64>)> = coords
        .iter()
        .zip(&jets)
        .map(|((_, _, c), jet)| (c.as_slice().to_vec(), jet.derivative.clone()))
        .collect();
    let fit = estimate_holder(&forward_samples, window(FORWARD_NOISE))?;
    let forward = RegularityReport {
        target: Target::Derivative {
            direction: u.as_slice().to_vec(),
        },
        verdict: Verdict::judge(&fit, config.alpha, log_corrected, config.tolerance),
        fit,
        failures: 0,
    };

    let inverse_rows: Vec<Option<(Vec<f64>, Vec<f64>)>> = coords
        .par_iter()
        .zip(&jets)
        .filter(|((b, _, _), _)| *b < config.inverse_bases || *b >= config.base_points)
        .map(|((_, _, c), jet)| {
            inverse_jacobian(&ccbp, c.as_slice(), jet.value(), k, config.inverse_step)
                .ok()
                .map(|m| (jet.value().to_vec(), m))
        })
        .collect();
    let failures = inverse_rows.iter().filter(|r| r.is_none()).count();
    let inverse_samples: Vec<_> = inverse_rows.into_iter().flatten().collect();
    debug_assert!(inverse_samples.iter().all(|s| s.1.len() == d * ccbp.n()));
    let fit = estimate_holder(&inverse_samples, window(INVERSE_NOISE))?;
    let inverse = RegularityReport {
        target: Target::InverseDerivative,
        verdict: Verdict::judge(&fit, config.alpha, log_corrected, config.tolerance),
        fit,
        failures,
    };

    Ok(PipelineReport {
        config: config.clone(),
        normalization,
        flatness,
        jones_beta,
        jones_eps,
        max_beta,
        max_displacement,
        forward,
        inverse,
        planes_fitted: ccbp.fitted_count(),
        band_clusters,
    })
}

/// Jacobian of `f_K^{-1} ∘ π` at `x = f_K(c)` by central differences along the
/// ambient axes, `π` the nearest-point projection realized by the inversion.
/// Row-major `d × n`.
pub fn inverse_jacobian(ccbp: &Ccbp, c: &[f64], x: &[f64], k: usize, h: f64) -> Result<Vec<f64>> {
    let n = ccbp.n();
    let d = ccbp.d();
    let mut out = vec![0.0; d * n];
    for a in 0..n {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[a] += h;
        minus[a] -= h;
        let p = invert_with_tolerance(ccbp, c, &plus, k, INVERSE_RESIDUAL)?;
        let m = invert_with_tolerance(ccbp, c, &minus, k, INVERSE_RESIDUAL)?;
        for i in 0..d {
            out[i * n + a] = (p.coords[i] - m.coords[i]) / (2.0 * h);
        }
    }
    Ok(out)
}

/// `sup_x` of the truncated β_∞ Jones sum over an evenly strided subset of the cloud.
fn beta_sup(cloud: &PointCloud, config: &PipelineConfig) -> Result<(JonesSup, f64)> {
    let finest = config.max_k.min(cloud.finest_resolved_scale());
    let stride = cloud.len().div_ceil(config.beta_samples).max(1);
    let indices: Vec<usize> = (0..cloud.len()).step_by(stride).collect();
    let rows = indices
        .par_iter()
        .map(|&i| {
            let x = cloud.point(i);
            (0..=finest)
                .map(|s| beta(cloud, x, s, Objective::Sup).map(|b| (s, b.value)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let max_beta = rows.iter().flatten().map(|t| t.1).fold(0.0, f64::max);
    let terms: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(s, b)| jones_weight(s, config.alpha, config.log_gamma).map_or(0.0, |w| b * b * w))
                .collect()
        })
        .collect();
    Ok((JonesSup::from_terms(&terms, config.max_k), max_beta))
}

/// Coordinate box of the cloud projected to `Σ_0`, trimmed by [`EDGE_TRIM`] on each side.
fn sigma0_extent(ccbp: &Ccbp, cloud: &PointCloud) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = ccbp.d();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let stride = cloud.len().div_ceil(EXTENT_SUBSAMPLE).max(1);
    for i in (0..cloud.len()).step_by(stride) {
        let c = ccbp.sigma0().coordinates(&cloud.point_vec(i))?;
        for a in 0..d {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    for a in 0..d {
        let w = hi[a] - lo[a];
        lo[a] += EDGE_TRIM * w;
        hi[a] -= EDGE_TRIM * w;
    }
    Ok((lo, hi))
}

/// Seeded base points in the box, each followed by satellites at distances
/// `δ_max 2^{-s}` down to `δ_min` in seeded directions.
fn sample_clusters(config: &PipelineConfig, lo: &[f64], hi: &[f64], delta_min: f64, delta_max: f64) -> Vec<Vec<DVector<f64>>> {
    let d = lo.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.base_points)
        .map(|_| {
            let base = DVector::from_iterator(d, (0..d).map(|a| rng.gen_range(lo[a]..=hi[a])));
            satellites(base, delta_min, delta_max, &mut rng)
        })
        .collect()
}

fn satellites(base: DVector<f64>, delta_min: f64, delta_max: f64, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let d = base.len();
    let mut cluster = vec![base.clone()];
    let mut delta = delta_max;
    while delta >= delta_min {
        let dir = loop {
            let v = DVector::from_iterator(d, (0..d).map(|_| rng.gen_range(-1.0..=1.0)));
            let norm = v.norm();
            if norm > 1e-3 && norm <= 1.0 {
                break v / norm;
            }
        };
        cluster.push(&base + dir * delta);
        delta *= 0.5;
    }
    cluster
}

/// Signed position of `f_s(z)` relative to the middle of the scale-`s` ψ band,
/// `dist(f_s(z), net_s) / r_s - 8.5`, for `s = 0..=finest`.
fn band_offsets(ccbp: &Ccbp, c: &DVector<f64>, finest: usize) -> Result<Vec<f64>> {
    let mut y = ccbp.sigma0().point_at(c)?;
    let mut out = Vec::with_capacity(finest + 1);
    for s in 0..=finest {
        let (_, dist) = ccbp.net().nearest(s, y.as_slice());
        out.push(dist / scale_radius(s) - 8.5);
        if s < finest {
            y = sigma(ccbp, y.as_slice(), s)?;
        }
    }
    Ok(out)
}

/// `Σ_0` coordinates where the flow crosses the middle of a ψ transition band
/// at some resolved scale. Away from holes every `f_s(z)` lies well inside
/// `V_s^8` and nothing is found. Across a band `Df_K` changes by a multiple of
/// the local plane misfit within `r_s`, so uniform sampling misses the fine ones.
fn band_crossings(ccbp: &Ccbp, lo: &[f64], hi: &[f64], finest: usize, resolution: f64) -> Result<Vec<DVector<f64>>> {
    let d = lo.len();
    let mut lines: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    for axis in 0..d {
        let offsets: Vec<f64> = if d == 1 {
            vec![0.0]
        } else {
            (0..BAND_LINES).map(|i| (i as f64 + 0.5) / BAND_LINES as f64).collect()
        };
        for f in offsets {
            let mut start = DVector::from_iterator(d, (0..d).map(|a| lo[a] + f * (hi[a] - lo[a])));
            let mut end = start.clone();
            start[axis] = lo[axis];
            end[axis] = hi[axis];
            lines.push((start, end));
        }
    }
    let at = |(a, b): &(DVector<f64>, DVector<f64>), t: f64| a + (b - a) * t;
    let mut found = lines
        .par_iter()
        .map(|line| {
            let ts: Vec<f64> = (0..BAND_SCAN_POINTS).map(|i| i as f64 / (BAND_SCAN_POINTS - 1) as f64).collect();
            let offsets = ts.iter().map(|&t| band_offsets(ccbp, &at(line, t), finest)).collect::<Result<Vec<_>>>()?;
            let length = (&line.1 - &line.0).norm();
            let mut hits = Vec::new();
            for i in 1..ts.len() {
                for s in 1..=finest {
                    let (g0, g1) = (offsets[i - 1][s], offsets[i][s]);
                    if (g0 < 0.0) == (g1 < 0.0) {
                        continue;
                    }
                    let (mut a, mut b) = (ts[i - 1], ts[i]);
                    while (b - a) * length > 0.1 * resolution.min(scale_radius(s)) {
                        let m = 0.5 * (a + b);
                        let g = band_offsets(ccbp, &at(line, m), s)?[s];
                        if (g < 0.0) == (g0 < 0.0) {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    hits.push(at(line, 0.5 * (a + b)));
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    if found.len() > MAX_BAND_CLUSTERS {
        let stride = found.len().div_ceil(MAX_BAND_CLUSTERS);
        found = found.into_iter().step_by(stride).collect();
    }
    Ok(found)
}

/// Deterministic sample of `Σ_0` points for callers that need `(z, f_K(z))` pairs.
pub fn sigma0_samples(ccbp: &Ccbp, cloud: &PointCloud, count: usize, seed: u64) -> Result<Vec<Point>> {
    let (lo, hi) = sigma0_extent(ccbp, cloud)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = DVector::from_iterator(lo.len(), (0..lo.len()).map(|a| rng.gen_range(lo[a]..=hi[a])));
            ccbp.sigma0().point_at(&c)
        })
        .collect()
}
