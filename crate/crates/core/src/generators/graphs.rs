//! Simple graph fixtures and flat samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

use super::{graph_cloud, haar_graph, unit_grid, Generated, HaarGraphSpec, Metadata};

/// Graph generators over `x ∈ [-1/2, 1/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphKind {
    /// `y = slope x + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// Piecewise linear zigzag of the given slope with `teeth` full periods.
    Sawtooth { slope: f64, teeth: usize },
    /// `y = height · exp(-x² / (2 width²))`.
    SmoothBump { height: f64, width: f64 },
    /// A Haar graph (the `x` grid is shifted to `[-1/2, 1/2]`).
    Haar(HaarGraphSpec),
}

/// Samples the graph on `count` uniform nodes.
pub fn graph_fixture(kind: &GraphKind, count: usize) -> Result<Generated> {
    let t = unit_grid(count)?;
    let x: Vec<f64> = t.iter().map(|v| v - 0.5).collect();
    let (y, regularity): (Vec<f64>, String) = match kind {
        GraphKind::Affine { slope, intercept } => (x.iter().map(|v| slope * v + intercept).collect(), "affine".into()),
        GraphKind::Sawtooth { slope, teeth } => {
            if *teeth == 0 {
                return Err(Error::InvalidParameter("sawtooth needs at least one tooth".into()));
            }
            let period = 1.0 / *teeth as f64;
            let y = t
                .iter()
                .map(|v| {
                    let u = (v / period).fract();
                    slope * period * u.min(1.0 - u)
                })
                .collect();
            (y, "Lipschitz".into())
        }
        GraphKind::SmoothBump { height, width } => {
            if !(*width > 0.0) {
                return Err(Error::InvalidParameter("bump width must be positive".into()));
            }
            (
                x.iter().map(|v| height * (-v * v / (2.0 * width * width)).exp()).collect(),
                "smooth".into(),
            )
        }
        GraphKind::Haar(spec) => {
            let spec = HaarGraphSpec { grid: count, ..spec.clone() };
            let h = haar_graph(&spec)?;
            let mut g = h.generated;
            g.cloud = graph_cloud(&x, &h.f)?;
            g.meta.generator = "graph_fixture".into();
            return Ok(g);
        }
    };
    let mut meta = Metadata::new("graph_fixture", serde_json::to_value(kind)?);
    meta.regularity = Some(regularity);
    Ok(Generated {
        cloud: graph_cloud(&x, &y)?,
        meta,
    })
}

/// Points of the coordinate `d`-plane through `(0, ..., 0, offset)` in `R^n`:
/// a `side^d` lattice on `[-1/2, 1/2]^d` when `jitter` is `None`, else `side^d`
/// uniform points from the seed.
pub fn flat_sample(n: usize, d: usize, side: usize, offset: f64, jitter: Option<u64>) -> Result<PointCloud> {
    if d == 0 || d > n || side < 2 {
        return Err(Error::InvalidParameter(format!("flat sample needs 1 <= d <= n and side >= 2")));
    }
    let count = side.pow(d as u32);
    let mut coords = Vec::with_capacity(count * n);
    let mut rng = jitter.map(ChaCha8Rng::seed_from_u64);
    for idx in 0..count {
        let mut rest = idx;
        for c in 0..n {
            let v = if c < d {
                let i = rest % side;
                rest /= side;
                match rng.as_mut() {
                    Some(r) => r.gen_range(-0.5..0.5),
                    None => i as f64 / (side - 1) as f64 - 0.5,
                }
            } else if c == n - 1 {
                offset
            } else {
                0.0
            };
            coords.push(v);
        }
    }
    PointCloud::new(n, d, coords, None)
}
