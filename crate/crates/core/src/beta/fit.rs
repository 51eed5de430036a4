//! Best-fitting d-planes in a ball under the sup, L1 and L2 objectives.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{dist2, AffinePlane, Point};

/// Which average of the point-to-plane distances is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "sup")]
    Sup,
    #[serde(rename = "L1")]
    L1,
    #[serde(rename = "L2")]
    L2,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Sup => "sup",
            Objective::L1 => "L1",
            Objective::L2 => "L2",
        })
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup" | "inf" | "Linf" => Ok(Objective::Sup),
            "L1" | "l1" | "1" => Ok(Objective::L1),
            "L2" | "l2" | "2" => Ok(Objective::L2),
            other => Err(Error::InvalidParameter(format!(
                "unknown objective '{other}' (expected sup, L1 or L2)"
            ))),
        }
    }
}

/// Weighted points (flat coordinates) used by a single fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSample {
    n: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl LocalSample {
    pub fn new(n: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if n == 0 || coords.len() % n != 0 || coords.len() / n != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates and {} weights do not form points in R^{n}",
                coords.len(),
                weights.len()
            )));
        }
        Ok(LocalSample { n, coords, weights })
    }

    /// Unit-weight sample.
    pub fn unweighted(n: usize, coords: Vec<f64>) -> Result<Self> {
        let count = if n == 0 { 0 } else { coords.len() / n };
        LocalSample::new(n, coords, vec![1.0; count])
    }

    /// Cloud points in `B(center, radius)` with their masses.
    pub fn from_cloud(cloud: &PointCloud, center: &[f64], radius: f64) -> Self {
        let idx = cloud.ball_indices(center, radius);
        let mut coords = Vec::with_capacity(idx.len() * cloud.n());
        let mut weights = Vec::with_capacity(idx.len());
        for &i in &idx {
            coords.extend_from_slice(cloud.point(i));
            weights.push(cloud.weight(i));
        }
        LocalSample {
            n: cloud.n(),
            coords,
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Every `stride`-th point.
    pub fn strided(&self, stride: usize) -> LocalSample {
        let stride = stride.max(1);
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for i in (0..self.len()).step_by(stride) {
            coords.extend_from_slice(self.point(i));
            weights.push(self.weights[i]);
        }
        LocalSample {
            n: self.n,
            coords,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// The points lying in the closed ball `B(center, radius)`.
    pub fn restrict(&self, center: &[f64], radius: f64) -> LocalSample {
        let r2 = radius * radius;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for i in 0..self.len() {
            if dist2(self.point(i), center) <= r2 {
                coords.extend_from_slice(self.point(i));
                weights.push(self.weights[i]);
            }
        }
        LocalSample {
            n: self.n,
            coords,
            weights,
        }
    }
}

/// A fitted plane with its normalized objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: AffinePlane,
    pub value: f64,
    /// Number of sample points in the ball.
    pub count: usize,
    /// Fewer than `d + 1` affinely independent points: the plane is one of
    /// many exact fits and carries no directional information.
    pub degenerate: bool,
}

const MAX_ITERATIONS: usize = 200;
const INITIAL_STEP: f64 = 0.1;
const MAX_STEP: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;
/// Multi-start from all (d+1)-point spans only when there are at most this many.
const MAX_SUBSET_STARTS: usize = 256;
/// Balls with more points are fitted on a strided subsample first.
const THIN_LIMIT: usize = 4000;
const POLISH_STEP: f64 = 2e-3;
const POLISH_ITERATIONS: usize = 40;

/// Normalized objective value of `plane` on the sample points in `B(center, r)`.
///
/// sup: `max dist / r`; L1: `r^{-d} Σ w dist / r`; L2: `sqrt(r^{-d} Σ w (dist / r)^2)`.
pub fn objective_value(
    sample: &LocalSample,
    center: &[f64],
    r: f64,
    d: usize,
    plane: &AffinePlane,
    objective: Objective,
) -> Result<f64> {
    check_dim(sample.n, plane.n())?;
    check_dim(sample.n, center.len())?;
    let local = sample.restrict(center, r);
    let dists = (0..local.len()).map(|i| (plane.distance(local.point(i)), local.weight(i)));
    Ok(normalize(accumulate(dists, objective), r, d, objective))
}

fn accumulate(dists: impl Iterator<Item = (f64, f64)>, objective: Objective) -> f64 {
    match objective {
        Objective::Sup => dists.fold(0.0, |m, (t, _)| m.max(t)),
        Objective::L1 => dists.map(|(t, w)| w * t).sum(),
        Objective::L2 => dists.map(|(t, w)| w * t * t).sum(),
    }
}

fn normalize(raw: f64, r: f64, d: usize, objective: Objective) -> f64 {
    match objective {
        Objective::Sup => raw / r,
        Objective::L1 => raw / r.powi(d as i32 + 1),
        Objective::L2 => (raw / r.powi(d as i32 + 2)).sqrt(),
    }
}

/// Best-fitting d-plane for the sample points in `B(center, r)`.
///
/// The L2 minimizer is exact (weighted principal directions). The sup and L1
/// fits start from the L2 plane and, for small samples, from every plane
/// spanned by `d + 1` sample points, then refine by rotations of the frame
/// towards the normal space with an adaptive step; the offset is optimal
/// for every trial orientation.
pub fn fit_plane(
    sample: &LocalSample,
    center: &[f64],
    r: f64,
    d: usize,
    objective: Objective,
) -> Result<PlaneFit> {
    let n = sample.n;
    check_dim(n, center.len())?;
    if d == 0 || d > n {
        return Err(Error::InvalidParameter(format!("need 1 <= d <= n, got d={d}, n={n}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let local = sample.restrict(center, r);
    let count = local.len();
    if count == 0 {
        return Err(Error::Degenerate(format!("no sample points in the ball of radius {r}")));
    }
    let mass = local.mass();
    let mut mean = DVector::zeros(n);
    for i in 0..count {
        mean.axpy(local.weight(i) / mass, &DVector::from_column_slice(local.point(i)), 1.0);
    }
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..count {
        let v = DVector::from_column_slice(local.point(i)) - &mean;
        cov.ger(local.weight(i) / mass, &v, &v, 1.0);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let basis = DMatrix::from_columns(&order.iter().map(|&c| eig.eigenvectors.column(c).into_owned()).collect::<Vec<_>>());
    let degenerate = count < d + 1 || eig.eigenvalues[order[d - 1]] <= (1e-10 * r).powi(2);

    // Full orthonormal basis: first d columns tangent, the rest normal.
    let mut best = Candidate::evaluate(&local, center, basis, d, objective);
    if !degenerate && objective != Objective::L2 {
        // Large balls: search orientations on a strided subsample, then polish on all points.
        let thinned = (count > THIN_LIMIT).then(|| local.strided(count.div_ceil(THIN_LIMIT)));
        let search = thinned.as_ref().unwrap_or(&local);
        let mut start = Candidate::evaluate(search, center, best.basis.clone(), d, objective);
        for basis in subset_starts(search, d) {
            let cand = Candidate::evaluate(search, center, basis, d, objective);
            if cand.raw < start.raw {
                start = cand;
            }
        }
        let found = refine(search, center, start, d, objective, INITIAL_STEP, MAX_ITERATIONS);
        best = if thinned.is_some() {
            let full = Candidate::evaluate(&local, center, found.basis, d, objective);
            let polished = refine(&local, center, full, d, objective, POLISH_STEP, POLISH_ITERATIONS);
            if polished.raw < best.raw {
                polished
            } else {
                best
            }
        } else {
            found
        };
    }
    let plane = best.plane(center, d);
    let value = match objective {
        Objective::L2 => {
            let raw = accumulate((0..count).map(|i| (plane.distance(local.point(i)), local.weight(i))), objective);
            normalize(raw, r, d, objective)
        }
        _ => normalize(best.raw, r, d, objective),
    };
    Ok(PlaneFit {
        plane,
        value,
        count,
        degenerate,
    })
}

#[derive(Debug, Clone)]
struct Candidate {
    basis: DMatrix<f64>,
    offset: DVector<f64>,
    raw: f64,
}

impl Candidate {
    fn evaluate(sample: &LocalSample, center: &[f64], basis: DMatrix<f64>, d: usize, objective: Objective) -> Self {
        let n = sample.n;
        let m = n - d;
        if m == 0 {
            return Candidate {
                basis,
                offset: DVector::zeros(0),
                raw: 0.0,
            };
        }
        let normals = basis.columns(d, m);
        let mut proj = Vec::with_capacity(sample.len() * m);
        for i in 0..sample.len() {
            let p = sample.point(i);
            for c in 0..m {
                let col = normals.column(c);
                proj.push((0..n).map(|a| col[a] * (p[a] - center[a])).sum::<f64>());
            }
        }
        let (offset, raw) = match objective {
            Objective::Sup => min_enclosing_ball(&proj, m),
            Objective::L1 => weighted_median(&proj, &sample.weights, m),
            Objective::L2 => weighted_mean(&proj, &sample.weights, m),
        };
        Candidate {
            basis,
            offset: DVector::from_vec(offset),
            raw,
        }
    }

    fn plane(&self, center: &[f64], d: usize) -> AffinePlane {
        let n = self.basis.nrows();
        let normals = self.basis.columns(d, n - d);
        let base = Point::from_column_slice(center) + normals * &self.offset;
        AffinePlane::from_frame_unchecked(base, self.basis.columns(0, d).into_owned())
    }
}

/// Orthonormal bases adapted to every plane through `d + 1` sample points.
fn subset_starts(sample: &LocalSample, d: usize) -> Vec<DMatrix<f64>> {
    let count = sample.len();
    if binomial(count, d + 1) > MAX_SUBSET_STARTS {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..=d).collect();
    loop {
        let p0 = DVector::from_column_slice(sample.point(idx[0]));
        let spans: Vec<DVector<f64>> = idx[1..]
            .iter()
            .map(|&i| DVector::from_column_slice(sample.point(i)) - &p0)
            .collect();
        if let Some(frame) = crate::geometry::orthonormalize(&spans) {
            out.push(crate::geometry::complete_basis(&frame));
        }
        // Next combination in lexicographic order.
        let mut pos = d as isize;
        while pos >= 0 && idx[pos as usize] == count - (d + 1) + pos as usize {
            pos -= 1;
        }
        if pos < 0 {
            break;
        }
        idx[pos as usize] += 1;
        for q in pos as usize + 1..=d {
            idx[q] = idx[q - 1] + 1;
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Rotations in the (tangent a, normal b) coordinate planes with an adaptive step.
fn refine(
    sample: &LocalSample,
    center: &[f64],
    mut best: Candidate,
    d: usize,
    objective: Objective,
    mut step: f64,
    iterations: usize,
) -> Candidate {
    let n = sample.n;
    for _ in 0..iterations {
        if step < MIN_STEP || best.raw == 0.0 {
            break;
        }
        let mut improved: Option<Candidate> = None;
        for a in 0..d {
            for b in d..n {
                for s in [step, -step] {
                    let (c, si) = (s.cos(), s.sin());
                    let mut basis = best.basis.clone();
                    let ta = best.basis.column(a).into_owned();
                    let nb = best.basis.column(b).into_owned();
                    basis.set_column(a, &(&ta * c + &nb * si));
                    basis.set_column(b, &(&nb * c - &ta * si));
                    let cand = Candidate::evaluate(sample, center, basis, d, objective);
                    let current = improved.as_ref().map_or(best.raw, |x| x.raw);
                    if cand.raw < current {
                        improved = Some(cand);
                    }
                }
            }
        }
        match improved {
            Some(c) => {
                best = c;
                step = (step * 1.5).min(MAX_STEP);
            }
            None => step *= 0.5,
        }
    }
    best
}

fn weighted_mean(proj: &[f64], weights: &[f64], m: usize) -> (Vec<f64>, f64) {
    let mass: f64 = weights.iter().sum();
    let mut c = vec![0.0; m];
    for (p, w) in proj.chunks_exact(m).zip(weights) {
        for (a, b) in c.iter_mut().zip(p) {
            *a += w * b / mass;
        }
    }
    let raw = proj.chunks_exact(m).zip(weights).map(|(p, w)| w * dist2(p, &c)).sum();
    (c, raw)
}

/// Minimizer of `Σ w |p - c|` over `c`: weighted median (m = 1) or Weiszfeld iteration.
fn weighted_median(proj: &[f64], weights: &[f64], m: usize) -> (Vec<f64>, f64) {
    let cost = |c: &[f64]| -> f64 {
        proj.chunks_exact(m)
            .zip(weights)
            .map(|(p, w)| w * dist2(p, c).sqrt())
            .sum()
    };
    if m == 1 {
        let mut pairs: Vec<(f64, f64)> = proj.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let half = 0.5 * weights.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut med = pairs[0].0;
        for (v, w) in &pairs {
            acc += w;
            med = *v;
            if acc >= half {
                break;
            }
        }
        let c = vec![med];
        let raw = cost(&c);
        return (c, raw);
    }
    let (mut c, _) = weighted_mean(proj, weights, m);
    let mut best = (c.clone(), cost(&c));
    for _ in 0..200 {
        let mut num = vec![0.0; m];
        let mut den = 0.0;
        for (p, w) in proj.chunks_exact(m).zip(weights) {
            let t = dist2(p, &c).sqrt().max(1e-300);
            den += w / t;
            for (a, b) in num.iter_mut().zip(p) {
                *a += w * b / t;
            }
        }
        let next: Vec<f64> = num.iter().map(|v| v / den).collect();
        let moved = dist2(&next, &c).sqrt();
        c = next;
        let val = cost(&c);
        if val < best.1 {
            best = (c.clone(), val);
        }
        if moved <= 1e-15 * (1.0 + best.1) {
            break;
        }
    }
    // Sample points themselves are candidates (Weiszfeld can stall at them).
    for p in proj.chunks_exact(m) {
        let val = cost(p);
        if val < best.1 {
            best = (p.to_vec(), val);
        }
    }
    best
}

/// Smallest enclosing ball of points in `R^m`: `(center, radius)`.
fn min_enclosing_ball(proj: &[f64], m: usize) -> (Vec<f64>, f64) {
    if m == 1 {
        let (lo, hi) = proj.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        return (vec![0.5 * (lo + hi)], 0.5 * (hi - lo));
    }
    let count = proj.len() / m;
    // Deterministic scrambled order keeps the expected running time linear.
    let mut order: Vec<usize> = (0..count).collect();
    let mut state = 0x2545_f491_4f6c_dd1du64;
    for i in (1..count).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        order.swap(i, (state % (i as u64 + 1)) as usize);
    }
    let pts: Vec<&[f64]> = order.iter().map(|&i| &proj[i * m..(i + 1) * m]).collect();
    let mut support = Vec::new();
    let ball = welzl(&pts, pts.len(), &mut support, m);
    // Report the true covering radius of the returned center.
    let radius = pts.iter().map(|p| dist2(p, &ball.0)).fold(0.0, f64::max).sqrt();
    (ball.0, radius)
}

fn welzl<'a>(pts: &[&'a [f64]], end: usize, support: &mut Vec<&'a [f64]>, m: usize) -> (Vec<f64>, f64) {
    let mut ball = ball_from_support(support, m);
    if support.len() == m + 1 {
        return ball;
    }
    for i in 0..end {
        let p = pts[i];
        if dist2(p, &ball.0).sqrt() > ball.1 * (1.0 + 1e-12) + 1e-300 || ball.1 < 0.0 {
            support.push(p);
            ball = welzl(pts, i, support, m);
            support.pop();
        }
    }
    ball
}

/// Smallest ball with all support points on its boundary (circumsphere in their affine hull).
fn ball_from_support(support: &[&[f64]], m: usize) -> (Vec<f64>, f64) {
    match support.len() {
        0 => (vec![0.0; m], -1.0),
        1 => (support[0].to_vec(), 0.0),
        _ => {
            let p0 = support[0];
            let k = support.len() - 1;
            let vs: Vec<Vec<f64>> = support[1..]
                .iter()
                .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
                .collect();
            let mut a = DMatrix::zeros(k, k);
            let mut rhs = DVector::zeros(k);
            for i in 0..k {
                for j in 0..k {
                    a[(i, j)] = 2.0 * vs[i].iter().zip(&vs[j]).map(|(x, y)| x * y).sum::<f64>();
                }
                rhs[i] = vs[i].iter().map(|x| x * x).sum();
            }
            let lambda = match a.clone().lu().solve(&rhs) {
                Some(l) if l.iter().all(|v| v.is_finite()) => l,
                _ => {
                    // Affinely dependent support: fall back to the farthest pair.
                    let mut best = (0.0, 0, 0);
                    for i in 0..support.len() {
                        for j in 0..i {
                            let t = dist2(support[i], support[j]);
                            if t > best.0 {
                                best = (t, i, j);
                            }
                        }
                    }
                    let c: Vec<f64> = support[best.1].iter().zip(support[best.2]).map(|(x, y)| 0.5 * (x + y)).collect();
                    return (c, 0.5 * best.0.sqrt());
                }
            };
            let mut c = p0.to_vec();
            for (l, v) in lambda.iter().zip(&vs) {
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci += l * vi;
                }
            }
            let r = dist2(&c, p0).sqrt();
            (c, r)
        }
    }
}
