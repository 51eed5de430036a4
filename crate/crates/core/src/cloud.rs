//! Weighted point clouds in `R^n` sampling a d-dimensional set.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist2, scale_radius, Point};
use crate::spatial::KdTree;

/// Finest scale index ever considered, whatever the sample density.
pub const MAX_SCALE: usize = 12;

const SPACING_SUBSAMPLE: usize = 20_000;

/// A finite sample of a set `E ⊂ R^n` of intrinsic dimension `d`, with an
/// optional positive mass per point.
///
/// Unweighted clouds carry the uniform probability measure (mass `1/N` per point).
#[derive(Debug, Clone)]
pub struct PointCloud {
    n: usize,
    d: usize,
    coords: Vec<f64>,
    weights: Option<Vec<f64>>,
    tree: OnceLock<KdTree>,
}

/// Affine map applied during normalization: `y = (x - shift) * scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: Vec<f64>,
    pub scale: f64,
}

impl Normalization {
    pub fn identity(n: usize) -> Self {
        Normalization {
            shift: vec![0.0; n],
            scale: 1.0,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).map(|(a, s)| (a - s) * self.scale).collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.shift).map(|(a, s)| a / self.scale + s).collect()
    }
}

impl PointCloud {
    /// Builds a cloud from flat coordinates (`n` values per point).
    pub fn new(n: usize, d: usize, coords: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if n == 0 || d == 0 || d > n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= d <= n, got d={d}, n={n}"
            )));
        }
        if coords.is_empty() {
            return Err(Error::Input("point cloud is empty".into()));
        }
        if coords.len() % n != 0 {
            return Err(Error::Input(format!(
                "{} coordinates do not split into points of dimension {n}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite coordinate in point {}", i / n)));
        }
        let count = coords.len() / n;
        if let Some(w) = &weights {
            if w.len() != count {
                return Err(Error::Input(format!(
                    "{} weights for {count} points",
                    w.len()
                )));
            }
            if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Input(format!("weight of point {i} is not positive")));
            }
        }
        Ok(PointCloud {
            n,
            d,
            coords,
            weights,
            tree: OnceLock::new(),
        })
    }

    pub fn from_points(d: usize, points: &[Point], weights: Option<Vec<f64>>) -> Result<Self> {
        let n = points.first().map_or(0, |p| p.len());
        let mut coords = Vec::with_capacity(n * points.len());
        for p in points {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.len(),
                });
            }
            coords.extend(p.iter());
        }
        PointCloud::new(n, d, coords, weights)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn point_vec(&self, i: usize) -> Point {
        Point::from_column_slice(self.point(i))
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.n)
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Mass of point `i`.
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    pub fn total_mass(&self) -> f64 {
        match &self.weights {
            Some(w) => w.iter().sum(),
            None => 1.0,
        }
    }

    /// Same points with explicit masses.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        PointCloud::new(self.n, self.d, self.coords.clone(), Some(weights))
    }

    /// The sub-cloud of the given indices (weights carried over).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.n);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        let weights = self.weights.as_ref().map(|w| indices.iter().map(|&i| w[i]).collect());
        PointCloud::new(self.n, self.d, coords, weights)
    }

    pub fn tree(&self) -> &KdTree {
        self.tree.get_or_init(|| KdTree::build(&self.coords, self.n))
    }

    /// Indices of the points in the closed ball `B(center, radius)`, ascending.
    pub fn ball_indices(&self, center: &[f64], radius: f64) -> Vec<usize> {
        self.tree().within(center, radius)
    }

    /// Mass `μ(B(center, radius))`.
    pub fn ball_mass(&self, center: &[f64], radius: f64) -> f64 {
        self.ball_indices(center, radius).iter().map(|&i| self.weight(i)).sum()
    }

    pub fn nearest(&self, y: &[f64]) -> (usize, f64) {
        self.tree().nearest(y, None).expect("cloud is nonempty")
    }

    /// Mass-weighted mean point.
    pub fn barycenter(&self) -> Point {
        let mut c = Point::zeros(self.n);
        let mut total = 0.0;
        for (i, p) in self.points().enumerate() {
            let w = self.weight(i);
            total += w;
            for (a, b) in c.iter_mut().zip(p) {
                *a += w * b;
            }
        }
        c / total
    }

    /// Translates the bounding-box center to the origin and shrinks (never
    /// enlarges) so that every point lies in the closed unit ball.
    ///
    /// Weights are rescaled by `scale^d` so that densities `μ(B)/r^d` are preserved.
    pub fn normalized(&self) -> (PointCloud, Normalization) {
        let mut lo = vec![f64::INFINITY; self.n];
        let mut hi = vec![f64::NEG_INFINITY; self.n];
        for p in self.points() {
            for c in 0..self.n {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        let shift: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let rmax = self
            .points()
            .map(|p| dist2(p, &shift))
            .fold(0.0, f64::max)
            .sqrt();
        let scale = if rmax > 1.0 { 1.0 / rmax } else { 1.0 };
        let map = Normalization { shift, scale };
        let coords: Vec<f64> = self.points().flat_map(|p| map.apply(p)).collect();
        let weights = self
            .weights
            .as_ref()
            .map(|w| w.iter().map(|v| v * scale.powi(self.d as i32)).collect());
        let cloud = PointCloud {
            n: self.n,
            d: self.d,
            coords,
            weights,
            tree: OnceLock::new(),
        };
        (cloud, map)
    }

    /// Median nearest-neighbor distance over a strided subsample of at most 20000 points.
    pub fn median_nn_spacing(&self) -> f64 {
        let count = self.len();
        if count < 2 {
            return 0.0;
        }
        let stride = count.div_ceil(SPACING_SUBSAMPLE).max(1);
        let tree = self.tree();
        let mut d: Vec<f64> = (0..count)
            .step_by(stride)
            .map(|i| tree.nearest(self.point(i), Some(i)).map_or(0.0, |(_, t)| t))
            .collect();
        let mid = d.len() / 2;
        *d.select_nth_unstable_by(mid, f64::total_cmp).1
    }

    /// Largest scale index `k ≤ MAX_SCALE` whose radius still exceeds the median sample spacing.
    pub fn finest_resolved_scale(&self) -> usize {
        let s = self.median_nn_spacing();
        (0..=MAX_SCALE)
            .take_while(|&k| scale_radius(k) >= s)
            .last()
            .unwrap_or(0)
    }
}
