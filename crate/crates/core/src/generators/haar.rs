//! Graphs of `f(x) = ∫_0^x g` with `g = Σ_j Σ_{|J| = 2^{-j}} a_J ∫_0^x h_J`, `h_J` the
//! `L¹`-normalized Haar wavelet of the dyadic interval `J`.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{cumulative_trapezoid, graph_cloud, unit_grid, Generated, Metadata};

pub const MAX_DEPTH: usize = 30;

/// `|a_J| = a_j` for `|J| = 2^{-j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientLaw {
    /// `a_j = 2^{-α j}`.
    Holder { alpha: f64 },
    /// `a_j = 2^{-j} / j`.
    LogLipschitz,
}

impl CoefficientLaw {
    pub fn coefficient(&self, j: usize) -> f64 {
        match self {
            CoefficientLaw::Holder { alpha } => 2f64.powf(-alpha * j as f64),
            CoefficientLaw::LogLipschitz => 2f64.powi(-(j as i32)) / j as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Signs {
    Positive,
    /// Independent fair signs, reproducible from the seed.
    Seeded { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarGraphSpec {
    pub law: CoefficientLaw,
    pub depth: usize,
    /// Number of grid nodes on `[0, 1]`.
    pub grid: usize,
    /// Overall factor on `g` (the slope scale of the graph).
    pub amplitude: f64,
    pub signs: Signs,
}

impl HaarGraphSpec {
    pub fn holder(alpha: f64, depth: usize, grid: usize) -> Self {
        HaarGraphSpec {
            law: CoefficientLaw::Holder { alpha },
            depth,
            grid,
            amplitude: 1.0,
            signs: Signs::Positive,
        }
    }

    fn validate(&self) -> Result<()> {
        if let CoefficientLaw::Holder { alpha } = self.law {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::InvalidParameter(format!("Haar exponent must lie in (0, 1], got {alpha}")));
            }
        }
        if self.depth > MAX_DEPTH {
            return Err(Error::InvalidParameter(format!("Haar depth must be at most {MAX_DEPTH}")));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter("amplitude must be finite".into()));
        }
        Ok(())
    }

    fn sign(&self, j: usize, index: u64) -> f64 {
        match self.signs {
            Signs::Positive => 1.0,
            Signs::Seeded { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                rng.set_word_pos(2 * index as u128);
                if rng.next_u32() & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// `g_k(x)` (levels `1..=k`, amplitude applied) at `x ∈ [0, 1]`.
pub fn haar_partial_sum(spec: &HaarGraphSpec, k: usize, x: f64) -> f64 {
    let mut g = 0.0;
    for j in 1..=k {
        let cells = (1u64 << j) as f64;
        let pos = (x * cells).clamp(0.0, cells);
        let index = (pos.floor() as u64).min((1u64 << j) - 1);
        let u = pos - index as f64;
        g += spec.sign(j, index) * spec.law.coefficient(j) * u.min(1.0 - u);
    }
    spec.amplitude * g
}

#[derive(Debug, Clone)]
pub struct HaarGraph {
    pub generated: Generated,
    pub x: Vec<f64>,
    /// `g = f'` on the grid.
    pub g: Vec<f64>,
    pub f: Vec<f64>,
}

pub fn haar_graph(spec: &HaarGraphSpec) -> Result<HaarGraph> {
    spec.validate()?;
    let x = unit_grid(spec.grid)?;
    let g: Vec<f64> = x.iter().map(|&t| haar_partial_sum(spec, spec.depth, t)).collect();
    let f = cumulative_trapezoid(&g, 1.0 / (spec.grid - 1) as f64);
    let cloud = graph_cloud(&x, &f)?;
    let mut meta = Metadata::new("haar_graph", serde_json::to_value(spec)?);
    let jones: f64 = match spec.law {
        CoefficientLaw::Holder { alpha } => (1..=spec.depth)
            .map(|j| spec.law.coefficient(j).powi(2) / 2f64.powf(-alpha * j as f64))
            .sum(),
        // Log-corrected weights with γ = 1: (a_j · j ln 2 / 2^{-j})².
        CoefficientLaw::LogLipschitz => (1..=spec.depth)
            .map(|j| (spec.law.coefficient(j) * j as f64 * std::f64::consts::LN_2 * 2f64.powi(j as i32)).powi(2))
            .sum(),
    };
    meta.diagnostics.insert("coefficient_sum".into(), jones);
    meta.diagnostics.insert("max_slope".into(), g.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    meta.regularity = Some(match spec.law {
        CoefficientLaw::Holder { alpha } => format!("C^{{1,{alpha}}} graph"),
        CoefficientLaw::LogLipschitz => "graph with log-Lipschitz derivative".into(),
    });
    Ok(HaarGraph {
        generated: Generated { cloud, meta },
        x,
        g,
        f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_is_flat() {
        let h = haar_graph(&HaarGraphSpec::holder(0.5, 0, 101)).unwrap();
        assert!(h.f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn partial_sum_increments_are_half_coefficients() {
        for signs in [Signs::Positive, Signs::Seeded { seed: 3 }] {
            let spec = HaarGraphSpec { signs, ..HaarGraphSpec::holder(0.4, 12, 2) };
            for k in 0..8 {
                let gap = (0..=4096)
                    .map(|i| {
                        let x = i as f64 / 4096.0;
                        (haar_partial_sum(&spec, k + 1, x) - haar_partial_sum(&spec, k, x)).abs()
                    })
                    .fold(0.0, f64::max);
                assert!((gap - spec.law.coefficient(k + 1) / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn seeded_signs_are_reproducible_and_mixed() {
        let spec = HaarGraphSpec { signs: Signs::Seeded { seed: 9 }, ..HaarGraphSpec::holder(0.5, 10, 2) };
        let signs: Vec<f64> = (0..64).map(|i| spec.sign(6, i)).collect();
        assert_eq!(signs, (0..64).map(|i| spec.sign(6, i)).collect::<Vec<_>>());
        assert!(signs.contains(&1.0) && signs.contains(&-1.0));
    }

    #[test]
    fn derivative_modulus_has_the_coefficient_exponent() {
        let alpha = 0.5;
        let spec = HaarGraphSpec::holder(alpha, 16, 2);
        // Max increment over dyadic starts at lag 2^{-m}: behaves like 2^{-αm}.
        let osc = |m: i32| {
            let lag = 2f64.powi(-m);
            (0..4096)
                .map(|i| {
                    let x = i as f64 / 4096.0 * (1.0 - lag);
                    (haar_partial_sum(&spec, 16, x + lag) - haar_partial_sum(&spec, 16, x)).abs()
                })
                .fold(0.0, f64::max)
        };
        let slope = (osc(12).ln() - osc(6).ln()) / ((2f64.powi(-12)).ln() - (2f64.powi(-6)).ln());
        assert!((slope - alpha).abs() < 0.05, "{slope}");
    }
}
