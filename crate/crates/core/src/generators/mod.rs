//! Example sets with controlled regularity: variable-angle snowflakes, Haar
//! wavelet graphs, Cantor-type `C^{1,s}` graphs, simple graph fixtures and
//! hole punching.

mod cantor;
mod graphs;
mod haar;
mod snowflake;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Ball;

pub use cantor::{cantor_c1s, CantorGraph, CantorSpec, GapSequence};
pub use graphs::{flat_sample, graph_fixture, GraphKind};
pub use haar::{haar_graph, haar_partial_sum, CoefficientLaw, HaarGraph, HaarGraphSpec, Signs};
pub use snowflake::{snowflake, AngleSequence, Snowflake, SnowflakeSpec};

/// Hard cap on generated cloud sizes.
pub const MAX_POINTS: usize = 10_000_000;

/// A generated cloud with a metadata sidecar.
#[derive(Debug, Clone)]
pub struct Generated {
    pub cloud: PointCloud,
    pub meta: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleRecord {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub generator: String,
    /// Echo of the generating parameters.
    pub spec: serde_json::Value,
    pub diagnostics: BTreeMap<String, f64>,
    /// Known regularity class of the generated set, when there is one.
    pub regularity: Option<String>,
    pub holes: Vec<HoleRecord>,
}

impl Metadata {
    pub(crate) fn new(generator: &str, spec: serde_json::Value) -> Self {
        Metadata {
            generator: generator.to_string(),
            spec,
            diagnostics: BTreeMap::new(),
            regularity: None,
            holes: Vec::new(),
        }
    }
}

/// Removes every point lying in one of the (closed) balls.
pub fn punch_holes(cloud: &PointCloud, holes: &[Ball]) -> Result<Generated> {
    for h in holes {
        crate::error::check_dim(cloud.n(), h.center.len())?;
    }
    let keep: Vec<usize> = (0..cloud.len())
        .filter(|&i| !holes.iter().any(|h| h.contains(cloud.point(i))))
        .collect();
    if keep.is_empty() {
        return Err(Error::Input("the holes remove every point of the cloud".into()));
    }
    let mut meta = Metadata::new("punch_holes", serde_json::Value::Null);
    meta.holes = holes
        .iter()
        .map(|h| HoleRecord {
            center: h.center.as_slice().to_vec(),
            radius: h.radius,
        })
        .collect();
    meta.diagnostics.insert("removed".into(), (cloud.len() - keep.len()) as f64);
    Ok(Generated {
        cloud: cloud.subset(&keep)?,
        meta,
    })
}

/// Cumulative trapezoid integral of samples `g` on a uniform grid of step `h`, starting at 0.
pub(crate) fn cumulative_trapezoid(g: &[f64], h: f64) -> Vec<f64> {
    let mut f = Vec::with_capacity(g.len());
    let mut acc = 0.0;
    for (i, v) in g.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * (g[i - 1] + v) * h;
        }
        f.push(acc);
    }
    f
}

/// Graph samples `(x_i, f_i)` as a `d = 1` cloud in the plane.
pub(crate) fn graph_cloud(x: &[f64], f: &[f64]) -> Result<PointCloud> {
    let coords = x.iter().zip(f).flat_map(|(a, b)| [*a, *b]).collect();
    PointCloud::new(2, 1, coords, None)
}

pub(crate) fn unit_grid(count: usize) -> Result<Vec<f64>> {
    if count < 2 || count > MAX_POINTS {
        return Err(Error::InvalidParameter(format!(
            "grid size must lie in [2, {MAX_POINTS}], got {count}"
        )));
    }
    Ok((0..count).map(|i| i as f64 / (count - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn punch_holes_cases() {
        let coords: Vec<f64> = (0..100).flat_map(|i| [i as f64 / 99.0, 0.0]).collect();
        let cloud = PointCloud::new(2, 1, coords, None).unwrap();
        let same = punch_holes(&cloud, &[]).unwrap();
        assert_eq!(same.cloud.coords(), cloud.coords());
        let hole = Ball::new(Point::from_vec(vec![0.5, 0.0]), 0.1).unwrap();
        let holed = punch_holes(&cloud, &[hole]).unwrap();
        assert!(holed.cloud.points().all(|p| (p[0] - 0.5).abs() > 0.1));
        assert_eq!(holed.meta.holes.len(), 1);
        let all = Ball::new(Point::from_vec(vec![0.5, 0.0]), 2.0).unwrap();
        assert!(punch_holes(&cloud, &[all]).is_err());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let f = cumulative_trapezoid(&g, 0.1);
        assert!((f[10] - 0.5).abs() < 1e-15);
    }
}
