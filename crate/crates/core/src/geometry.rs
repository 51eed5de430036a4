//! Points, affine d-planes, balls, and the distances and angles between planes.
//!
//! A d-plane is stored as a base point together with an orthonormal tangent
//! frame (an `n x d` matrix with orthonormal columns). Projections, normal
//! components and principal angles are all computed from the frame.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A point (or vector) of the ambient space `R^n`.
pub type Point = DVector<f64>;

/// Default number of boundary samples used by [`plane_dist`].
pub const DEFAULT_PLANE_SAMPLES: usize = 1024;

const ORTHO_TOL: f64 = 1e-10;

/// Radius of the ball at scale index `k`: `r_k = 10^{-k}`.
pub fn scale_radius(k: usize) -> f64 {
    10f64.powi(-(k as i32))
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// An affine d-plane `base + span(frame)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneRecord", into = "PlaneRecord")]
pub struct AffinePlane {
    base: Point,
    frame: DMatrix<f64>,
}

/// Serialized form of an [`AffinePlane`]: the base point and one row per frame vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneRecord {
    pub base: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
}

impl From<AffinePlane> for PlaneRecord {
    fn from(p: AffinePlane) -> Self {
        PlaneRecord {
            base: p.base.iter().copied().collect(),
            frame: (0..p.frame.ncols())
                .map(|c| p.frame.column(c).iter().copied().collect())
                .collect(),
        }
    }
}

impl TryFrom<PlaneRecord> for AffinePlane {
    type Error = Error;

    fn try_from(rec: PlaneRecord) -> Result<Self> {
        let n = rec.base.len();
        let vectors: Vec<Point> = rec.frame.into_iter().map(Point::from_vec).collect();
        for v in &vectors {
            check_dim(n, v.len())?;
        }
        AffinePlane::new(Point::from_vec(rec.base), &vectors)
    }
}

impl AffinePlane {
    /// Builds a plane from a base point and orthonormal frame vectors.
    ///
    /// The frame is re-orthonormalized after the check so the stored frame is
    /// orthonormal to machine precision.
    pub fn new(base: Point, frame: &[Point]) -> Result<Self> {
        let n = base.len();
        for v in frame {
            check_dim(n, v.len())?;
        }
        for (i, a) in frame.iter().enumerate() {
            for (j, b) in frame.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (a.dot(b) - expect).abs() > ORTHO_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "frame vectors {i},{j} are not orthonormal"
                    )));
                }
            }
        }
        Self::from_spanning(base, frame)
    }

    /// Builds a plane spanned by (not necessarily orthonormal) vectors.
    pub fn from_spanning(base: Point, vectors: &[Point]) -> Result<Self> {
        let n = base.len();
        if vectors.is_empty() || vectors.len() > n {
            return Err(Error::InvalidParameter(format!(
                "plane dimension {} not in 1..={n}",
                vectors.len()
            )));
        }
        if base.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite base point".into()));
        }
        let frame = orthonormalize(vectors)
            .ok_or_else(|| Error::Degenerate("spanning vectors are linearly dependent".into()))?;
        Ok(AffinePlane { base, frame })
    }

    /// Builds a plane from a base point and a matrix whose columns are already orthonormal.
    pub(crate) fn from_frame_unchecked(base: Point, frame: DMatrix<f64>) -> Self {
        AffinePlane { base, frame }
    }

    /// The coordinate d-plane spanned by the first `d` axes, through `base`.
    pub fn coordinate(base: Point, d: usize) -> Result<Self> {
        let n = base.len();
        let vectors: Vec<Point> = (0..d)
            .map(|i| {
                let mut e = Point::zeros(n);
                e[i] = 1.0;
                e
            })
            .collect();
        Self::from_spanning(base, &vectors)
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    pub fn d(&self) -> usize {
        self.frame.ncols()
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    /// `n x d` matrix with orthonormal columns.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn frame_vector(&self, i: usize) -> Point {
        self.frame.column(i).into_owned()
    }

    /// Same directions, passing through `base`.
    pub fn rebased(&self, base: Point) -> Result<Self> {
        check_dim(self.n(), base.len())?;
        Ok(AffinePlane {
            base,
            frame: self.frame.clone(),
        })
    }

    /// Orthogonal projector onto the direction space (the Jacobian of the projection).
    pub fn projector(&self) -> DMatrix<f64> {
        &self.frame * self.frame.transpose()
    }

    /// Orthogonal projector onto the normal space.
    pub fn normal_projector(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n(), self.n()) - self.projector()
    }

    /// Orthonormal basis of the normal space, `n x (n - d)`.
    pub fn normal_frame(&self) -> DMatrix<f64> {
        let full = complete_basis(&self.frame);
        full.columns(self.d(), self.n() - self.d()).into_owned()
    }

    /// Orthogonal projection of `y` onto the plane.
    pub fn project(&self, y: &Point) -> Result<Point> {
        check_dim(self.n(), y.len())?;
        let rel = y - &self.base;
        Ok(&self.base + &self.frame * (self.frame.transpose() * rel))
    }

    /// Projection of `y` onto the direction space through the origin.
    pub fn project_linear(&self, y: &Point) -> Result<Point> {
        check_dim(self.n(), y.len())?;
        Ok(&self.frame * (self.frame.transpose() * y))
    }

    /// Linear normal projection `y - project_linear(y)`.
    pub fn normal_project(&self, y: &Point) -> Result<Point> {
        Ok(y - self.project_linear(y)?)
    }

    /// Normal component of `y - base`, i.e. `y - project(y)`.
    pub fn normal_offset(&self, y: &Point) -> Result<Point> {
        check_dim(self.n(), y.len())?;
        let rel = y - &self.base;
        let tang = &self.frame * (self.frame.transpose() * &rel);
        Ok(rel - tang)
    }

    /// Euclidean distance from `y` to the plane.
    pub fn distance(&self, y: &[f64]) -> f64 {
        let mut rel = vec![0.0; self.n()];
        for (r, (a, b)) in rel.iter_mut().zip(y.iter().zip(self.base.iter())) {
            *r = a - b;
        }
        let mut sq: f64 = rel.iter().map(|v| v * v).sum();
        for c in 0..self.d() {
            let col = self.frame.column(c);
            let t: f64 = col.iter().zip(&rel).map(|(a, b)| a * b).sum();
            sq -= t * t;
        }
        if sq > 1e-6 * rel.iter().map(|v| v * v).sum::<f64>() {
            return sq.max(0.0).sqrt();
        }
        // Cancellation-safe fallback for points close to the plane.
        let y = Point::from_column_slice(y);
        self.normal_offset(&y).map(|v| v.norm()).unwrap_or(f64::NAN)
    }

    /// Coordinates of `y` in the plane frame, `F^T (y - base)`.
    pub fn coordinates(&self, y: &Point) -> Result<DVector<f64>> {
        check_dim(self.n(), y.len())?;
        Ok(self.frame.transpose() * (y - &self.base))
    }

    /// The point `base + F c`.
    pub fn point_at(&self, coords: &DVector<f64>) -> Result<Point> {
        check_dim(self.d(), coords.len())?;
        Ok(&self.base + &self.frame * coords)
    }
}

/// A closed ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        dist2(self.center.as_slice(), y) <= self.radius * self.radius
    }
}

/// Free-function form of [`AffinePlane::project`].
pub fn project(plane: &AffinePlane, y: &Point) -> Result<Point> {
    plane.project(y)
}

/// Free-function form of [`AffinePlane::normal_project`].
pub fn normal_project(plane: &AffinePlane, y: &Point) -> Result<Point> {
    plane.normal_project(y)
}

/// Normalized Hausdorff distance `d_{x,r}(P, Q)` between two planes restricted to `B(x, r)`.
///
/// Each one-sided supremum is taken over `P ∩ B(x, r)`, a d-disk. The
/// distance to an affine plane is a convex function, so its supremum over
/// the disk is attained on the relative boundary sphere; that sphere is
/// sampled with `samples` deterministic points (two endpoints when `d = 1`).
pub fn plane_dist(
    x: &Point,
    r: f64,
    p: &AffinePlane,
    q: &AffinePlane,
    samples: usize,
) -> Result<f64> {
    check_dim(p.n(), q.n())?;
    check_dim(p.n(), x.len())?;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let a = one_sided_sup(x, r, p, q, samples)?;
    let b = one_sided_sup(x, r, q, p, samples)?;
    Ok(a.max(b) / r)
}

/// Cheap upper bound for [`plane_dist`]: for each side, the distance from the
/// disk center to the other plane plus the disk radius times the Frobenius norm
/// of the normal part of the frame. `None` when either plane misses the ball.
pub fn plane_dist_bound(x: &Point, r: f64, p: &AffinePlane, q: &AffinePlane) -> Option<f64> {
    if p.n() > BOUND_MAX_N {
        return plane_dist_bound_generic(x, r, p, q);
    }
    Some(bound_side(x, r, p, q)?.max(bound_side(x, r, q, p)?) / r)
}

const BOUND_MAX_N: usize = 8;

/// Allocation-free side of [`plane_dist_bound`] for `n ≤ BOUND_MAX_N`.
fn bound_side(x: &Point, r: f64, from: &AffinePlane, to: &AffinePlane) -> Option<f64> {
    let n = from.n();
    let (f, g) = (&from.frame, &to.frame);
    let mut center = [0.0; BOUND_MAX_N];
    center[..n].copy_from_slice(from.base.as_slice());
    for c in 0..from.d() {
        let t: f64 = (0..n).map(|i| f[(i, c)] * (x[i] - from.base[i])).sum();
        for i in 0..n {
            center[i] += t * f[(i, c)];
        }
    }
    let rho2 = r * r - (0..n).map(|i| (x[i] - center[i]).powi(2)).sum::<f64>();
    if rho2 < 0.0 {
        return None;
    }
    // Normal residual of center - to.base, and of each column of the frame.
    let residual_norm = |v: &[f64]| -> f64 {
        let mut w = [0.0; BOUND_MAX_N];
        w[..n].copy_from_slice(v);
        for c in 0..to.d() {
            let t: f64 = (0..n).map(|i| g[(i, c)] * v[i]).sum();
            for i in 0..n {
                w[i] -= t * g[(i, c)];
            }
        }
        w[..n].iter().map(|a| a * a).sum::<f64>()
    };
    let mut rel = [0.0; BOUND_MAX_N];
    for i in 0..n {
        rel[i] = center[i] - to.base[i];
    }
    let offset = residual_norm(&rel[..n]).sqrt();
    let tilt: f64 = (0..from.d())
        .map(|c| residual_norm(f.column(c).as_slice()))
        .sum::<f64>()
        .sqrt();
    Some(offset + rho2.sqrt() * tilt)
}

fn plane_dist_bound_generic(x: &Point, r: f64, p: &AffinePlane, q: &AffinePlane) -> Option<f64> {
    let side = |from: &AffinePlane, to: &AffinePlane| -> Option<f64> {
        let center = from.project(x).ok()?;
        let rho2 = r * r - (x - &center).norm_squared();
        if rho2 < 0.0 {
            return None;
        }
        let tilt = (&from.frame - &to.frame * (to.frame.transpose() * &from.frame)).norm();
        let rel = &center - &to.base;
        let offset = (&rel - &to.frame * (to.frame.transpose() * &rel)).norm();
        Some(offset + rho2.sqrt() * tilt)
    };
    Some(side(p, q)?.max(side(q, p)?) / r)
}

fn one_sided_sup(x: &Point, r: f64, from: &AffinePlane, to: &AffinePlane, samples: usize) -> Result<f64> {
    let center = from.project(x)?;
    let off2 = (x - &center).norm_squared();
    let rho2 = r * r - off2;
    if rho2 < -1e-12 * r * r {
        return Err(Error::PlaneMissesBall { radius: r });
    }
    let rho = rho2.max(0.0).sqrt();
    let d = from.d();
    let dirs = sphere_directions(d, samples);
    let mut best = to.distance(center.as_slice());
    let mut pt = vec![0.0; from.n()];
    for w in dirs.chunks_exact(d) {
        for (i, v) in pt.iter_mut().enumerate() {
            let mut s = center[i];
            for (c, wc) in w.iter().enumerate() {
                s += rho * from.frame[(i, c)] * wc;
            }
            *v = s;
        }
        best = best.max(to.distance(&pt));
    }
    Ok(best)
}

/// Largest principal angle between the direction spaces of two planes of equal dimension.
pub fn plane_angle(p: &AffinePlane, q: &AffinePlane) -> Result<f64> {
    check_dim(p.n(), q.n())?;
    check_dim(p.d(), q.d())?;
    let gram = p.frame.transpose() * &q.frame;
    let cos = gram
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .clamp(0.0, 1.0);
    let resid = &q.frame - &p.frame * &gram;
    let sin = resid
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0);
    Ok(sin.atan2(cos))
}

/// Gram-Schmidt (twice) on `vectors`; `None` when they are linearly dependent.
pub(crate) fn orthonormalize(vectors: &[Point]) -> Option<DMatrix<f64>> {
    let n = vectors.first()?.len();
    let mut cols: Vec<Point> = Vec::with_capacity(vectors.len());
    let scale = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for c in &cols {
                let t = c.dot(&w);
                w.axpy(-t, c, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= 1e-12 * scale {
            return None;
        }
        cols.push(w / norm);
    }
    Some(DMatrix::from_columns(&cols).resize(n, vectors.len(), 0.0))
}

/// Extends the orthonormal columns of `frame` to an orthonormal basis of `R^n`.
pub(crate) fn complete_basis(frame: &DMatrix<f64>) -> DMatrix<f64> {
    let n = frame.nrows();
    let mut cols: Vec<Point> = (0..frame.ncols()).map(|c| frame.column(c).into_owned()).collect();
    while cols.len() < n {
        // Pick the standard basis vector with the largest residual.
        let mut best: Option<(f64, Point)> = None;
        for i in 0..n {
            let mut w = Point::zeros(n);
            w[i] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let t = c.dot(&w);
                    w.axpy(-t, c, 1.0);
                }
            }
            let norm = w.norm();
            if best.as_ref().map_or(true, |(b, _)| norm > *b) {
                best = Some((norm, w));
            }
        }
        let (norm, w) = best.expect("n > 0");
        cols.push(w / norm);
    }
    DMatrix::from_columns(&cols)
}

type DirectionCache = Mutex<HashMap<(usize, usize), Arc<Vec<f64>>>>;

/// Deterministic quasi-uniform unit vectors in `R^d`, flattened (`d` entries each).
pub(crate) fn sphere_directions(d: usize, samples: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<DirectionCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (d, if d == 1 { 2 } else { samples.max(1) });
    if let Some(v) = cache.lock().expect("direction cache poisoned").get(&key) {
        return v.clone();
    }
    let dirs = Arc::new(build_directions(key.0, key.1));
    cache
        .lock()
        .expect("direction cache poisoned")
        .insert(key, dirs.clone());
    dirs
}

fn build_directions(d: usize, m: usize) -> Vec<f64> {
    match d {
        0 => Vec::new(),
        1 => vec![1.0, -1.0],
        2 => (0..m)
            .flat_map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                [t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Halton points in the cube, pushed onto the sphere.
            const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
            let mut out = Vec::with_capacity(d * m);
            let mut i = 1u64;
            while out.len() < d * m {
                let v: Vec<f64> = (0..d)
                    .map(|c| 2.0 * radical_inverse(i, PRIMES[c % PRIMES.len()]) - 1.0)
                    .collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 1e-3 && norm <= 1.0 {
                    out.extend(v.iter().map(|a| a / norm));
                }
                i += 1;
            }
            out
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    fn line(base: &[f64], dir: &[f64]) -> AffinePlane {
        AffinePlane::from_spanning(p(base), &[p(dir)]).unwrap()
    }

    #[test]
    fn project_onto_axis() {
        let axis = line(&[0.0, 0.0], &[1.0, 0.0]);
        let y = axis.project(&p(&[3.0, 4.0])).unwrap();
        assert_relative_eq!(y, p(&[3.0, 0.0]), epsilon = 1e-15);
        let on = p(&[-2.5, 0.0]);
        assert_relative_eq!(axis.project(&on).unwrap(), on, epsilon = 1e-15);
    }

    #[test]
    fn project_matches_least_squares_oracle() {
        let diag = line(&[1.0, 1.0], &[1.0, 1.0]);
        let y = p(&[2.0, 0.0]);
        let got = diag.project(&y).unwrap();
        // Oracle: minimize |base + t dir - y| over a fine grid of t, then refine.
        let dir = p(&[1.0, 1.0]) / 2f64.sqrt();
        let mut best = (f64::INFINITY, 0.0);
        for i in -20000..=20000 {
            let t = i as f64 * 1e-4;
            let q = p(&[1.0, 1.0]) + &dir * t;
            let dd = (&q - &y).norm();
            if dd < best.0 {
                best = (dd, t);
            }
        }
        let oracle = p(&[1.0, 1.0]) + &dir * best.1;
        assert_relative_eq!(got, oracle, epsilon = 1e-4);
        assert_relative_eq!(got, p(&[1.0, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn normal_projection_examples() {
        let axis = line(&[0.0, 0.0], &[1.0, 0.0]);
        assert_relative_eq!(axis.normal_project(&p(&[3.0, 4.0])).unwrap(), p(&[0.0, 4.0]));
        assert_relative_eq!(axis.normal_project(&p(&[7.0, 0.0])).unwrap(), p(&[0.0, 0.0]));
        let tilted = line(&[0.3, -0.2], &[0.6, 0.8]);
        let y = p(&[1.7, -0.4]);
        let sum = tilted.project_linear(&y).unwrap() + tilted.normal_project(&y).unwrap();
        assert_relative_eq!(sum, y, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let axis = line(&[0.0, 0.0], &[1.0, 0.0]);
        assert!(matches!(
            axis.project(&p(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn plane_dist_examples() {
        let x = p(&[0.0, 0.0]);
        let a = line(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(plane_dist(&x, 0.7, &a, &a, 64).unwrap(), 0.0);

        let phi: f64 = 0.3;
        let b = line(&[0.0, 0.0], &[phi.cos(), phi.sin()]);
        for r in [0.01, 1.0, 5.0] {
            let got = plane_dist(&x, r, &a, &b, 64).unwrap();
            assert!((got - phi.sin()).abs() <= 0.02 * phi.sin());
        }

        let off = line(&[0.0, 0.2], &[1.0, 0.0]);
        let got = plane_dist(&x, 1.0, &a, &off, 64).unwrap();
        assert!((got - 0.2).abs() <= 0.02 * 0.2);
        // Doubling r halves the normalized offset.
        let got2 = plane_dist(&x, 2.0, &a, &off, 64).unwrap();
        assert!((got2 - 0.1).abs() <= 0.02 * 0.1);
    }

    #[test]
    fn plane_dist_matches_dense_interior_sampling_in_3d() {
        // Two 2-planes in R^3: the boundary-sampled sup agrees with a dense
        // sample of the whole disk.
        let x = p(&[0.1, -0.1, 0.05]);
        let a = AffinePlane::from_spanning(p(&[0.0, 0.0, 0.0]), &[p(&[1.0, 0.0, 0.0]), p(&[0.0, 1.0, 0.0])])
            .unwrap();
        let b = AffinePlane::from_spanning(p(&[0.0, 0.0, 0.03]), &[p(&[1.0, 0.0, 0.1]), p(&[0.0, 1.0, -0.05])])
            .unwrap();
        let r = 0.8;
        let got = plane_dist(&x, r, &a, &b, 1024).unwrap();
        let mut oracle: f64 = 0.0;
        for (from, to) in [(&a, &b), (&b, &a)] {
            let c = from.project(&x).unwrap();
            let rho = (r * r - (&x - &c).norm_squared()).sqrt();
            let m = 400;
            for i in 0..=m {
                for j in 0..=m {
                    let u = -1.0 + 2.0 * i as f64 / m as f64;
                    let v = -1.0 + 2.0 * j as f64 / m as f64;
                    if u * u + v * v > 1.0 {
                        continue;
                    }
                    let q = &c + from.frame() * DVector::from_vec(vec![rho * u, rho * v]);
                    oracle = oracle.max(to.distance(q.as_slice()));
                }
            }
        }
        assert!((got - oracle / r).abs() <= 0.02 * oracle / r, "{got} vs {}", oracle / r);
    }

    #[test]
    fn plane_dist_rejects_missing_plane() {
        let a = line(&[0.0, 0.0], &[1.0, 0.0]);
        let far = line(&[0.0, 5.0], &[1.0, 0.0]);
        assert!(matches!(
            plane_dist(&p(&[0.0, 0.0]), 1.0, &a, &far, 64),
            Err(Error::PlaneMissesBall { .. })
        ));
    }

    #[test]
    fn principal_angles() {
        let a = line(&[0.0, 0.0], &[1.0, 0.0]);
        let b = line(&[0.0, 0.0], &[0.0, 1.0]);
        let c = line(&[3.0, 1.0], &[1.0, 1.0]);
        assert_eq!(plane_angle(&a, &a).unwrap(), 0.0);
        assert_relative_eq!(plane_angle(&a, &b).unwrap(), std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        let oracle = (1.0 / 2f64.sqrt()).acos();
        assert_relative_eq!(plane_angle(&a, &c).unwrap(), oracle, epsilon = 1e-14);
        let tiny = line(&[0.0, 0.0], &[1.0, 1e-9]);
        assert_relative_eq!(plane_angle(&a, &tiny).unwrap(), 1e-9, max_relative = 1e-6);
    }

    #[test]
    fn serde_round_trip() {
        let plane = line(&[0.5, -0.25], &[0.6, 0.8]);
        let json = serde_json::to_string(&plane).unwrap();
        let back: AffinePlane = serde_json::from_str(&json).unwrap();
        assert_relative_eq!(back.base(), plane.base());
        assert_relative_eq!(back.frame(), plane.frame(), epsilon = 1e-15);
    }

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI);
        assert_relative_eq!(unit_ball_volume(3), 4.0 / 3.0 * std::f64::consts::PI, epsilon = 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn plane_strategy() -> impl Strategy<Value = AffinePlane> {
            (
                prop::collection::vec(-1.0f64..1.0, 3),
                prop::collection::vec(-1.0f64..1.0, 3),
                prop::collection::vec(-1.0f64..1.0, 3),
            )
                .prop_filter_map("independent", |(b, u, v)| {
                    AffinePlane::from_spanning(p(&b), &[p(&u), p(&v)]).ok()
                })
        }

        proptest! {
            #[test]
            fn projection_is_idempotent(plane in plane_strategy(), y in prop::collection::vec(-2.0f64..2.0, 3)) {
                let y = p(&y);
                let once = plane.project(&y).unwrap();
                let twice = plane.project(&once).unwrap();
                prop_assert!((once - twice).norm() <= 1e-12);
            }

            #[test]
            fn pythagoras(plane in plane_strategy(), y in prop::collection::vec(-2.0f64..2.0, 3)) {
                let y = p(&y);
                let proj = plane.project(&y).unwrap();
                let lhs = (&y - plane.base()).norm_squared();
                let rhs = (&proj - plane.base()).norm_squared() + plane.normal_offset(&y).unwrap().norm_squared();
                prop_assert!((lhs - rhs).abs() <= 1e-10);
            }

            #[test]
            fn plane_dist_is_symmetric(a in plane_strategy(), b in plane_strategy(), r in 3.5f64..6.0) {
                let x = p(&[0.0, 0.0, 0.0]);
                let ab = plane_dist(&x, r, &a, &b, 64).unwrap();
                let ba = plane_dist(&x, r, &b, &a, 64).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!((0.0..=2.0).contains(&ab));
            }

            #[test]
            fn plane_dist_bound_dominates(a in plane_strategy(), b in plane_strategy(), r in 3.5f64..6.0) {
                let x = p(&[0.0, 0.0, 0.0]);
                let exact = plane_dist(&x, r, &a, &b, 256).unwrap();
                let bound = plane_dist_bound(&x, r, &a, &b).unwrap();
                prop_assert!(bound >= exact - 1e-12, "{} < {}", bound, exact);
                prop_assert_eq!(plane_dist_bound(&x, r, &a, &a.rebased(a.project(&x).unwrap()).unwrap()).map(|v| v < 1e-12), Some(true));
                let generic = plane_dist_bound_generic(&x, r, &a, &b).unwrap();
                prop_assert!((generic - bound).abs() <= 1e-12 * (1.0 + bound));
            }
        }
    }
}
