//! Variable-angle snowflake curves.
//!
//! Generation `i` adds, to every segment of length `2^{-i+1}`, an isosceles
//! triangle of base a third of the segment and base angle `α_i`. The curve is
//! built to first order in the angles: its tangent angle is a sum of
//! per-generation profiles, `+α_i` on the left half of each middle third and
//! `-α_i` on the right half, and the curve is the integral of the unit tangent.
//! With `smoothing > 0` every jump of a profile becomes a smoothstep ramp whose
//! width is that fraction of the generation's segment length.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{cumulative_trapezoid, unit_grid, Generated, Metadata};

/// Largest angle accepted at any generation.
pub const MAX_ANGLE: f64 = PI / 8.0;

/// The angles `α_1, α_2, ...` used at successive generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AngleSequence {
    /// `α_i = θ`.
    Constant { theta: f64 },
    /// `α_i = c · base^{-α i}`.
    Geometric { c: f64, alpha: f64, base: f64 },
    /// Explicit values; generations past the end use 0.
    List { values: Vec<f64> },
}

impl AngleSequence {
    pub const DEFAULT_C: f64 = 0.02;
    pub const DEFAULT_BASE: f64 = 2.0;

    /// `α_i` for generation `i ≥ 1`.
    pub fn angle(&self, i: usize) -> f64 {
        match self {
            AngleSequence::Constant { theta } => *theta,
            AngleSequence::Geometric { c, alpha, base } => c * base.powf(-alpha * i as f64),
            AngleSequence::List { values } => values.get(i - 1).copied().unwrap_or(0.0),
        }
    }
}

/// `constant:<θ>`, `geometric:<α>[:<c>[:<base>]]` or `list:<a1>,<a2>,...`.
impl FromStr for AngleSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse angle sequence {s:?}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "constant" => Ok(AngleSequence::Constant { theta: num(rest)? }),
            "geometric" => {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() > 3 {
                    return Err(bad());
                }
                Ok(AngleSequence::Geometric {
                    alpha: num(parts[0])?,
                    c: parts.get(1).map(|p| num(p)).transpose()?.unwrap_or(Self::DEFAULT_C),
                    base: parts.get(2).map(|p| num(p)).transpose()?.unwrap_or(Self::DEFAULT_BASE),
                })
            }
            "list" => Ok(AngleSequence::List {
                values: rest.split(',').map(num).collect::<Result<_>>()?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnowflakeSpec {
    pub angles: AngleSequence,
    pub depth: usize,
    /// Grid nodes along the arc-length parameter.
    pub samples: usize,
    /// Ramp width of each angle jump as a fraction of the segment length
    /// (`0` keeps the corners). At most [`MAX_SMOOTHING`].
    pub smoothing: f64,
    /// Exponent for the weighted diagnostic `Σ α_i² / 2^{-2αi}`.
    pub target_alpha: Option<f64>,
}

/// Ramps wider than this would overlap the neighboring jump.
pub const MAX_SMOOTHING: f64 = 1.0 / 6.0;
pub const DEFAULT_SMOOTHING: f64 = 1.0 / 12.0;

impl SnowflakeSpec {
    pub fn new(angles: AngleSequence, depth: usize, samples: usize) -> Self {
        SnowflakeSpec {
            angles,
            depth,
            samples,
            smoothing: DEFAULT_SMOOTHING,
            target_alpha: None,
        }
    }

    /// Length of the segments that receive triangles at generation `i ≥ 1`.
    pub fn segment_length(i: usize) -> f64 {
        2f64.powi(1 - i as i32)
    }

    /// Tangent angle at arc-length parameter `t ∈ [0, 1]`.
    pub fn tangent_angle(&self, t: f64) -> f64 {
        (1..=self.depth)
            .map(|i| {
                let len = Self::segment_length(i);
                let u = (t / len).fract();
                self.angles.angle(i) * (step(u, 1.0 / 3.0, self.smoothing) - 2.0 * step(u, 0.5, self.smoothing)
                    + step(u, 2.0 / 3.0, self.smoothing))
            })
            .sum()
    }

    fn validate(&self) -> Result<()> {
        for i in 1..=self.depth {
            let a = self.angles.angle(i);
            if !(0.0..=MAX_ANGLE).contains(&a) {
                return Err(Error::InvalidParameter(format!(
                    "angle {a} at generation {i} outside [0, π/8]"
                )));
            }
        }
        if self.depth > 40 {
            return Err(Error::InvalidParameter(format!("depth {} exceeds 40", self.depth)));
        }
        if !(0.0..=MAX_SMOOTHING).contains(&self.smoothing) {
            return Err(Error::InvalidParameter(format!(
                "smoothing must lie in [0, 1/6], got {}",
                self.smoothing
            )));
        }
        Ok(())
    }
}

/// Unit step at `a`, or a quintic ramp of width `w` centered there.
fn step(u: f64, a: f64, w: f64) -> f64 {
    if w == 0.0 {
        return if u >= a { 1.0 } else { 0.0 };
    }
    let s = ((u - a) / w + 0.5).clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Generated snowflake with its samples in arc-length order.
#[derive(Debug, Clone)]
pub struct Snowflake {
    pub generated: Generated,
    /// Arc-length parameter of each sample, before rescaling.
    pub t: Vec<f64>,
    /// Tangent angle at each sample.
    pub angle: Vec<f64>,
}

impl Snowflake {
    /// Length after rescaling the endpoints to `(0, 0)` and `(1, 0)`.
    pub fn length(&self) -> f64 {
        self.generated.meta.diagnostics["length"]
    }
}

/// Integrates the unit tangent over `samples` grid nodes, then rotates and
/// rescales so the endpoints land on `(0, 0)` and `(1, 0)`.
pub fn snowflake(spec: &SnowflakeSpec) -> Result<Snowflake> {
    spec.validate()?;
    let t = unit_grid(spec.samples)?;
    let h = 1.0 / (spec.samples - 1) as f64;
    let angle: Vec<f64> = t.iter().map(|&s| spec.tangent_angle(s)).collect();
    let xs = cumulative_trapezoid(&angle.iter().map(|a| a.cos()).collect::<Vec<_>>(), h);
    let ys = cumulative_trapezoid(&angle.iter().map(|a| a.sin()).collect::<Vec<_>>(), h);
    let (ex, ey) = (xs[xs.len() - 1], ys[ys.len() - 1]);
    let chord = ex.hypot(ey);
    if !(chord > 0.0) {
        return Err(Error::Degenerate("snowflake endpoints coincide".into()));
    }
    let (c, s) = (ex / chord, ey / chord);
    let coords: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .flat_map(|(x, y)| [(c * x + s * y) / chord, (c * y - s * x) / chord])
        .collect();
    let cloud = crate::cloud::PointCloud::new(2, 1, coords, None)?;

    let mut meta = Metadata::new("snowflake", serde_json::to_value(spec)?);
    let angles: Vec<f64> = (1..=spec.depth).map(|i| spec.angles.angle(i)).collect();
    meta.diagnostics.insert("sum_sq_angles".into(), angles.iter().map(|a| a * a).sum());
    if let Some(alpha) = spec.target_alpha {
        let weighted = angles
            .iter()
            .enumerate()
            .map(|(i, a)| a * a / 2f64.powf(-2.0 * alpha * (i + 1) as f64))
            .sum();
        meta.diagnostics.insert("weighted_sum_sq_angles".into(), weighted);
    }
    meta.diagnostics.insert("length".into(), 1.0 / chord);
    // Spacing of the angle jumps of the finest generation.
    meta.diagnostics
        .insert("finest_scale".into(), SnowflakeSpec::segment_length(spec.depth.max(1)) / 6.0 / chord);
    meta.regularity = Some(if spec.smoothing > 0.0 {
        format!("smoothed snowflake of depth {}", spec.depth)
    } else {
        format!("snowflake polygon of depth {}", spec.depth)
    });
    Ok(Snowflake {
        generated: Generated { cloud, meta },
        t,
        angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(angles: AngleSequence, depth: usize) -> SnowflakeSpec {
        SnowflakeSpec::new(angles, depth, 1 << 14)
    }

    #[test]
    fn zero_angles_give_the_unit_segment() {
        let f = snowflake(&spec(AngleSequence::Constant { theta: 0.0 }, 3)).unwrap();
        assert_eq!(f.generated.cloud.len(), 1 << 14);
        assert!(f.generated.cloud.points().all(|p| p[1] == 0.0));
        assert!((f.length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_generation_is_a_triangle() {
        // Hard corners: the middle third rises to height sin(α)/6 at t = 1/2; the
        // trapezoid rule smears each corner over one grid step.
        let mut s = spec(AngleSequence::List { values: vec![0.3] }, 1);
        s.smoothing = 0.0;
        s.samples = 6 * 1024 + 1;
        let f = snowflake(&s).unwrap();
        let chord = 1.0 / f.length();
        let oracle_chord = 2.0 / 3.0 + (0.3f64).cos() / 3.0;
        assert!((chord - oracle_chord).abs() < 1e-9, "{chord} {oracle_chord}");
        let apex = f.generated.cloud.point(3 * 1024);
        let h = 1.0 / (s.samples - 1) as f64;
        assert!((apex[1] - (0.3f64).sin() / 6.0 / chord).abs() < h);
        assert!((apex[0] - 0.5).abs() < h);
    }

    #[test]
    fn tangent_profile_has_zero_mean_per_segment() {
        let s = spec(AngleSequence::Geometric { c: 0.2, alpha: 0.5, base: 2.0 }, 5);
        for i in 1..=5 {
            let len = SnowflakeSpec::segment_length(i);
            let single = SnowflakeSpec {
                angles: AngleSequence::List {
                    values: (1..=5).map(|g| if g == i { 0.2 } else { 0.0 }).collect(),
                },
                ..s.clone()
            };
            let m = 6000;
            let mean: f64 = (0..m).map(|q| single.tangent_angle(len * (q as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64;
            assert!(mean.abs() < 1e-6, "generation {i}: {mean}");
        }
    }

    #[test]
    fn constant_angle_length_grows() {
        let lengths: Vec<f64> = (1..=8)
            .map(|m| snowflake(&spec(AngleSequence::Constant { theta: 0.2 }, m)).unwrap().length())
            .collect();
        assert!(lengths.windows(2).all(|w| w[1] > w[0]), "{lengths:?}");
    }

    #[test]
    fn summable_angles_converge() {
        let seq = AngleSequence::Geometric { c: 0.35, alpha: 1.0, base: 2.0 };
        let l9 = snowflake(&spec(seq.clone(), 9)).unwrap().length();
        let l10 = snowflake(&spec(seq, 10)).unwrap().length();
        assert!((l10 - l9).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_input_and_parses() {
        assert!(snowflake(&spec(AngleSequence::Constant { theta: 0.5 }, 2)).is_err());
        let mut s = spec(AngleSequence::Constant { theta: 0.1 }, 2);
        s.smoothing = 0.2;
        assert!(snowflake(&s).is_err());
        let g: AngleSequence = "geometric:0.3".parse().unwrap();
        assert_eq!(g, AngleSequence::Geometric { c: 0.02, alpha: 0.3, base: 2.0 });
        let l: AngleSequence = "list:0.1,0.05".parse().unwrap();
        assert_eq!(l.angle(3), 0.0);
        assert!("spiral:1".parse::<AngleSequence>().is_err());
    }
}
