//! Sampling `f_K` on a grid of `Σ_0`, mesh export, and Newton inversion.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ccbp::Ccbp;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{dist2, Point};

use super::flow::{flow, sigma0_point, FlowJet};

/// A square grid `[lo, hi]^d` in the frame coordinates of `Σ_0`, `count` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo < hi) || count < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs lo < hi and at least 2 nodes, got [{lo}, {hi}] x {count}"
            )));
        }
        Ok(GridSpec { lo, hi, count })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        self.lo + self.spacing() * i as f64
    }
}

/// Vertices `f_K(z_i)` over a `Σ_0` grid with tangent frames `Df_K(z_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub grid: GridSpec,
    /// `Σ_0` frame coordinates of each vertex.
    pub params: Vec<Vec<f64>>,
    pub vertices: Vec<Vec<f64>>,
    /// Per vertex, the `d` columns of `Df_K` on the frame of `Σ_0`.
    pub frames: Vec<Vec<Vec<f64>>>,
    /// Grid edges as vertex index pairs.
    pub edges: Vec<(usize, usize)>,
    /// Triangles (for `d = 2`).
    pub faces: Vec<[usize; 3]>,
}

/// Evaluates `f_K` on the grid. Supports `d ∈ {1, 2}`.
pub fn surface_mesh(ccbp: &Ccbp, grid: GridSpec, k: usize) -> Result<Mesh> {
    let d = ccbp.d();
    let m = grid.count;
    let params: Vec<Vec<f64>> = match d {
        1 => (0..m).map(|i| vec![grid.node(i)]).collect(),
        2 => (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| vec![grid.node(i), grid.node(j)])
            .collect(),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "meshes are built for d = 1 or 2, got d = {d}"
            )))
        }
    };
    let dir = ccbp.sigma0().frame_vector(0);
    let jets: Vec<FlowJet> = params
        .par_iter()
        .map(|c| {
            let z = sigma0_point(ccbp, c)?;
            flow(ccbp, z.as_slice(), k, dir.as_slice())
        })
        .collect::<Result<_>>()?;
    let mut edges = Vec::new();
    let mut faces = Vec::new();
    if d == 1 {
        edges.extend((1..m).map(|i| (i - 1, i)));
    } else {
        let id = |i: usize, j: usize| i * m + j;
        for i in 0..m {
            for j in 0..m {
                if i + 1 < m {
                    edges.push((id(i, j), id(i + 1, j)));
                }
                if j + 1 < m {
                    edges.push((id(i, j), id(i, j + 1)));
                }
                if i + 1 < m && j + 1 < m {
                    faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                    faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
        }
    }
    Ok(Mesh {
        n: ccbp.n(),
        d,
        k,
        grid,
        params,
        vertices: jets.iter().map(|j| j.value().to_vec()).collect(),
        frames: jets.into_iter().map(|j| j.frame).collect(),
        edges,
        faces,
    })
}

impl Mesh {
    /// Ratios `|f(a) - f(b)| / |a - b|` over the grid edges.
    pub fn edge_ratios(&self) -> Vec<f64> {
        self.edges
            .iter()
            .map(|&(a, b)| {
                (dist2(&self.vertices[a], &self.vertices[b]) / dist2(&self.params[a], &self.params[b])).sqrt()
            })
            .collect()
    }

    /// `d = 1`: CSV rows `t,arc,x_1,...,x_n` with cumulative arc length.
    pub fn write_polyline_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.d != 1 {
            return Err(Error::InvalidParameter("polyline export needs d = 1".into()));
        }
        let coords: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        writeln!(out, "t,arc,{}", coords.join(","))?;
        let mut arc = 0.0;
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                arc += dist2(v, &self.vertices[i - 1]).sqrt();
            }
            let cols: Vec<String> = v.iter().map(|c| format!("{c:.17e}")).collect();
            writeln!(out, "{:.17e},{:.17e},{}", self.params[i][0], arc, cols.join(","))?;
        }
        Ok(())
    }

    /// `d = 2, n = 3`: Wavefront OBJ with vertex normals `∂_1 f × ∂_2 f`.
    pub fn write_obj<W: Write>(&self, mut out: W) -> Result<()> {
        if self.d != 2 || self.n != 3 {
            return Err(Error::InvalidParameter("OBJ export needs d = 2 and n = 3".into()));
        }
        for v in &self.vertices {
            writeln!(out, "v {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
        }
        for f in &self.frames {
            let a = nalgebra::Vector3::new(f[0][0], f[0][1], f[0][2]);
            let b = nalgebra::Vector3::new(f[1][0], f[1][1], f[1][2]);
            let nrm = a.cross(&b).normalize();
            writeln!(out, "vn {:.17e} {:.17e} {:.17e}", nrm[0], nrm[1], nrm[2])?;
        }
        for t in &self.faces {
            writeln!(out, "f {0}//{0} {1}//{1} {2}//{2}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }
}

/// Outcome of [`invert`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inverse {
    /// `Σ_0` frame coordinates.
    pub coords: Vec<f64>,
    /// The point of `Σ_0`.
    pub z: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub const INVERT_MAX_ITERATIONS: usize = 50;
pub const INVERT_TOLERANCE: f64 = 1e-8;

/// Finds `z ∈ Σ_0` minimizing `|f_K(z) - target|`, seeded at the nearest mesh vertex,
/// by damped Gauss–Newton steps using `Df_K`.
///
/// Succeeds when the residual drops below `1e-8` or the iteration becomes
/// stationary (a target off the surface converges to its nearest-point parameter).
pub fn invert(ccbp: &Ccbp, mesh: &Mesh, target: &[f64], k: usize) -> Result<Inverse> {
    check_dim(ccbp.n(), target.len())?;
    let seed = (0..mesh.vertices.len())
        .min_by(|&a, &b| dist2(&mesh.vertices[a], target).total_cmp(&dist2(&mesh.vertices[b], target)))
        .ok_or_else(|| Error::Input("mesh has no vertices".into()))?;
    invert_from(ccbp, &mesh.params[seed], target, k)
}

/// [`invert`] from explicit starting coordinates.
pub fn invert_from(ccbp: &Ccbp, start: &[f64], target: &[f64], k: usize) -> Result<Inverse> {
    invert_with_tolerance(ccbp, start, target, k, INVERT_TOLERANCE)
}

/// [`invert_from`] with an explicit residual tolerance.
pub fn invert_with_tolerance(ccbp: &Ccbp, start: &[f64], target: &[f64], k: usize, tolerance: f64) -> Result<Inverse> {
    let t = DVector::from_column_slice(target);
    let dir = ccbp.sigma0().frame_vector(0);
    let eval = |c: &DVector<f64>| -> Result<(Point, DMatrix<f64>)> {
        let z = ccbp.sigma0().point_at(c)?;
        let jet = flow(ccbp, z.as_slice(), k, dir.as_slice())?;
        Ok((Point::from_column_slice(jet.value()), jet.frame_matrix()))
    };
    let mut c = DVector::from_column_slice(start);
    let (mut f, mut jac) = eval(&c)?;
    let mut res = (&t - &f).norm();
    for it in 0..INVERT_MAX_ITERATIONS {
        if res <= tolerance {
            return finish(ccbp, c, res, it);
        }
        let r = &t - &f;
        let normal = jac.transpose() * &jac;
        let step = match normal.clone().cholesky() {
            Some(ch) => ch.solve(&(jac.transpose() * &r)),
            None => return Err(Error::NonConvergence { iterations: it, residual: res }),
        };
        if step.norm() <= 1e-14 * c.norm().max(1.0) {
            return finish(ccbp, c, res, it);
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-6 {
            let trial = &c + &step * lambda;
            let (tf, tj) = eval(&trial)?;
            let tres = (&t - &tf).norm();
            if tres < res {
                c = trial;
                f = tf;
                jac = tj;
                res = tres;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // No decrease along the Gauss–Newton direction: stationary up to rounding.
            if step.norm() <= 1e-9 * c.norm().max(1.0) {
                return finish(ccbp, c, res, it + 1);
            }
            return Err(Error::NonConvergence { iterations: it + 1, residual: res });
        }
    }
    if res <= tolerance {
        return finish(ccbp, c, res, INVERT_MAX_ITERATIONS);
    }
    Err(Error::NonConvergence {
        iterations: INVERT_MAX_ITERATIONS,
        residual: res,
    })
}

fn finish(ccbp: &Ccbp, c: DVector<f64>, residual: f64, iterations: usize) -> Result<Inverse> {
    let z = ccbp.sigma0().point_at(&c)?;
    Ok(Inverse {
        coords: c.as_slice().to_vec(),
        z: z.as_slice().to_vec(),
        residual,
        iterations,
    })
}
