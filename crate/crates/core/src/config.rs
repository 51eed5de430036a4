//! Run configuration shared by every command: parsed from TOML, overridden by
//! flags, validated once and embedded in every artifact.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::beta::{check_exponents, BallReading};
use crate::ccbp::{CcbpParams, DEFAULT_CHECK_SAMPLES, DEFAULT_EPS_MAX, DEFAULT_FIT_RADIUS};
use crate::diagnostics::PipelineConfig;
use crate::error::{Error, Result};

/// Largest accepted depth; `r_K = 10^{-K}` below this is under the f64 spacing of the unit ball.
pub const MAX_DEPTH: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleCounts {
    /// Cloud points carrying the β-based Jones sum.
    pub beta: usize,
    /// Base points on `Σ_0` for the forward fit.
    pub base_points: usize,
    pub inverse_bases: usize,
    pub eps_traces: usize,
    /// Net points per scale in the one-sided flatness check.
    pub flatness_cap: usize,
    /// Boundary samples per `d_{x,r}` evaluation in CCBP checks.
    pub check_samples: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        let p = PipelineConfig::default();
        SampleCounts {
            beta: p.beta_samples,
            base_points: p.base_points,
            inverse_bases: p.inverse_bases,
            eps_traces: p.eps_traces,
            flatness_cap: p.flatness_cap,
            check_samples: DEFAULT_CHECK_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Intrinsic dimension; when set it must match the input header.
    pub d: Option<usize>,
    /// Ambient dimension; when set it must match the input header.
    pub n: Option<usize>,
    pub eps: f64,
    pub alpha: f64,
    /// Log-correction exponent, required (`> 1/2`) when `alpha = 1`.
    pub gamma: Option<f64>,
    #[serde(rename = "K")]
    pub k: usize,
    /// Plane fits use `B(x, A r_k)`.
    #[serde(rename = "A")]
    pub fit_radius: f64,
    /// Accepted exponent deviation in the verdict.
    pub tolerance: f64,
    /// Lower end of the Hölder fit window in input units.
    pub min_distance: Option<f64>,
    pub reading: BallReading,
    pub samples: SampleCounts,
    pub seed: u64,
    /// Worker threads, 0 for one per core. Results do not depend on it.
    pub threads: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        RunConfig {
            d: None,
            n: None,
            eps: p.eps,
            alpha: p.alpha,
            gamma: None,
            k: p.max_k,
            fit_radius: DEFAULT_FIT_RADIUS,
            tolerance: p.tolerance,
            min_distance: None,
            reading: p.reading,
            samples: SampleCounts::default(),
            seed: 0,
            threads: 0,
            input: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {}", e.message())))
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(d), Some(n)) = (self.d, self.n) {
            if d == 0 || d > n {
                return Err(Error::InvalidParameter(format!("need 1 <= d <= n, got d={d}, n={n}")));
            }
        }
        if !(self.eps > 0.0 && self.eps <= 0.1) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 0.1], got {}", self.eps)));
        }
        check_exponents(self.alpha, self.gamma)?;
        if self.k > MAX_DEPTH {
            return Err(Error::InvalidParameter(format!("K must be at most {MAX_DEPTH}, got {}", self.k)));
        }
        self.pipeline().validate()?;
        self.ccbp().validate()
    }

    /// Checks declared dimensions against a loaded cloud.
    pub fn check_dimensions(&self, n: usize, d: usize) -> Result<()> {
        for (name, declared, found) in [("n", self.n, n), ("d", self.d, d)] {
            if declared.is_some_and(|v| v != found) {
                return Err(Error::Input(format!(
                    "config declares {name}={}, input has {name}={found}",
                    declared.unwrap_or_default()
                )));
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            alpha: self.alpha,
            log_gamma: self.gamma,
            max_k: self.k,
            eps: self.eps,
            fit_radius: self.fit_radius,
            tolerance: self.tolerance,
            beta_samples: self.samples.beta,
            base_points: self.samples.base_points,
            inverse_bases: self.samples.inverse_bases,
            eps_traces: self.samples.eps_traces,
            flatness_cap: self.samples.flatness_cap,
            min_distance: self.min_distance,
            reading: self.reading,
            seed: self.seed,
            ..PipelineConfig::default()
        }
    }

    pub fn ccbp(&self) -> CcbpParams {
        CcbpParams {
            eps: self.eps,
            eps_max: DEFAULT_EPS_MAX.max(self.eps),
            fit_radius: self.fit_radius,
            check_samples: self.samples.check_samples,
        }
    }
}
