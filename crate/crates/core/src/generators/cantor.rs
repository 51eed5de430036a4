//! Cantor-type sets `E = ∩ E_n` of positive measure and the `C^{1,s}` functions
//! `f(x) = ∫_0^x dist(t, E)^s dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{cumulative_trapezoid, graph_cloud, unit_grid, Generated, Metadata};

pub const MAX_DEPTH: usize = 30;

/// Relative gap sizes `a_0, a_1, ...` removed at each generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GapSequence {
    /// `a_n = q^{-(n+1)}`.
    Power { q: f64 },
    List { values: Vec<f64> },
}

impl GapSequence {
    pub fn gap(&self, n: usize) -> f64 {
        match self {
            GapSequence::Power { q } => q.powi(-(n as i32 + 1)),
            GapSequence::List { values } => values[n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorSpec {
    pub s: f64,
    pub gaps: GapSequence,
    pub depth: usize,
    pub grid: usize,
    /// Overall factor on `g`.
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct CantorGraph {
    pub generated: Generated,
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    /// Interval lengths `l_0 = 1, l_{n+1} = l_n (1 - a_n) / 2`.
    pub lengths: Vec<f64>,
    /// `|E_n| = 2^n l_n`.
    pub measures: Vec<f64>,
}

impl CantorSpec {
    fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {}", self.s)));
        }
        if self.depth > MAX_DEPTH {
            return Err(Error::InvalidParameter(format!("Cantor depth must be at most {MAX_DEPTH}")));
        }
        if let GapSequence::List { values } = &self.gaps {
            if values.len() < self.depth {
                return Err(Error::InvalidParameter(format!(
                    "{} gaps listed for depth {}",
                    values.len(),
                    self.depth
                )));
            }
        }
        let mut sum = 0.0;
        for n in 0..self.depth {
            let a = self.gaps.gap(n);
            if !(a > 0.0 && a < 1.0) || (n > 0 && a >= self.gaps.gap(n - 1)) {
                return Err(Error::InvalidParameter(
                    "gaps must form a strictly decreasing sequence in (0, 1)".into(),
                ));
            }
            sum += a;
        }
        if sum >= 1.0 {
            return Err(Error::InvalidParameter(format!("gap sum {sum} must stay below 1")));
        }
        Ok(())
    }

    /// `dist(x, E_depth)`-based distance to `E`: zero inside the surviving intervals.
    ///
    /// Endpoints of every interval of every `E_n` belong to `E`, so a point in a
    /// removed gap is at distance `min(x - left end, right end - x)` from `E`.
    pub fn distance_to_set(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return -x;
        }
        if x >= 1.0 {
            return x - 1.0;
        }
        let (mut left, mut len) = (0.0, 1.0);
        for n in 0..self.depth {
            let a = self.gaps.gap(n);
            let child = len * (1.0 - a) / 2.0;
            let gap_lo = left + child;
            let gap_hi = left + len - child;
            if x <= gap_lo {
                len = child;
            } else if x >= gap_hi {
                left = gap_hi;
                len = child;
            } else {
                return (x - gap_lo).min(gap_hi - x);
            }
        }
        0.0
    }
}

pub fn cantor_c1s(spec: &CantorSpec) -> Result<CantorGraph> {
    spec.validate()?;
    let x = unit_grid(spec.grid)?;
    let g: Vec<f64> = x.iter().map(|&t| spec.amplitude * spec.distance_to_set(t).powf(spec.s)).collect();
    let f = cumulative_trapezoid(&g, 1.0 / (spec.grid - 1) as f64);
    let mut lengths = vec![1.0];
    for n in 0..spec.depth {
        let l = lengths[n] * (1.0 - spec.gaps.gap(n)) / 2.0;
        lengths.push(l);
    }
    let measures: Vec<f64> = lengths.iter().enumerate().map(|(n, l)| 2f64.powi(n as i32) * l).collect();
    let cloud = graph_cloud(&x, &f)?;
    let mut meta = Metadata::new("cantor_c1s", serde_json::to_value(spec)?);
    meta.diagnostics.insert("set_measure".into(), *measures.last().expect("E_0 exists"));
    meta.regularity = Some(format!("C^{{1,{}}} graph", spec.s));
    Ok(CantorGraph {
        generated: Generated { cloud, meta },
        x,
        g,
        f,
        lengths,
        measures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> CantorSpec {
        CantorSpec {
            s: 0.5,
            gaps: GapSequence::Power { q: 4.0 },
            depth: 12,
            grid: 4097,
            amplitude: 1.0,
        }
    }

    #[test]
    fn measure_follows_the_length_recursion() {
        let c = cantor_c1s(&spec()).unwrap();
        let mut product = 1.0;
        for n in 0..12 {
            product *= 1.0 - 4f64.powi(-(n + 1));
            assert!((c.measures[n as usize + 1] - product).abs() < 1e-12);
        }
        assert!(c.measures[12] > 0.6);
    }

    #[test]
    fn g_vanishes_on_the_set_and_rejects_bad_gaps() {
        let s = spec();
        // 0 and the left endpoints of surviving intervals lie in E.
        assert_eq!(s.distance_to_set(0.0), 0.0);
        let l1 = (1.0 - 0.25) / 2.0;
        assert_eq!(s.distance_to_set(l1), 0.0);
        assert!((s.distance_to_set(0.5) - 0.125).abs() < 1e-15);
        let bad = CantorSpec { gaps: GapSequence::List { values: vec![0.1, 0.2, 0.05] }, depth: 3, ..spec() };
        assert!(cantor_c1s(&bad).is_err());
        let big = CantorSpec { gaps: GapSequence::Power { q: 1.5 }, depth: 5, ..spec() };
        assert!(cantor_c1s(&big).is_err());
    }
}
