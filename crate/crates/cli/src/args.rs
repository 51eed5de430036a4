use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "reifen", version, about = "Multiscale flatness, CCBPs and C^{1,α} parametrizations of point clouds")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Run configuration flags; each overrides the matching `--config` entry.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input point cloud (CSV, or binary for `.bin` / `.rfp`).
    #[arg(long, short, global = true)]
    pub input: Option<PathBuf>,
    /// Output path (command-specific default).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Log-correction exponent (required with --alpha 1).
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Depth K.
    #[arg(long = "k", short = 'k', global = true)]
    pub k: Option<usize>,
    /// Plane fits use B(x, A r_k).
    #[arg(long = "fit-radius", global = true)]
    pub fit_radius: Option<f64>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Lower end of the Hölder fit window, in input units.
    #[arg(long = "min-distance", global = true)]
    pub min_distance: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Declared ambient dimension, checked against the input.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Declared intrinsic dimension, checked against the input.
    #[arg(long, global = true)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Binary,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a fixture cloud with a metadata sidecar.
    Gen(GenArgs),
    /// Build the multiscale net.
    Net,
    /// β numbers and Jones sums at sample points.
    Beta(BetaArgs),
    /// Build the CCBP and check coherence and one-sided flatness.
    #[command(name = "ccbp-check")]
    CcbpCheck,
    /// Sample f_K on a grid of Σ_0 and measure the distortion bounds.
    Param(ParamArgs),
    /// Predict regularity from β decay and measure it.
    Regularity(RegularityArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(subcommand)]
    pub fixture: Fixture,
    /// Remove the closed ball `x1,...,xn:r` (repeatable).
    #[arg(long = "hole", global = true)]
    pub holes: Vec<String>,
    /// Cloud file format for the output (default from the extension).
    #[arg(long = "binary", global = true)]
    pub binary: bool,
}

#[derive(Debug, Subcommand)]
pub enum Fixture {
    /// Variable-angle snowflake curve in the plane.
    Snowflake {
        /// `constant:θ`, `geometric:α[:c[:base]]` or `list:a1,a2,...`.
        #[arg(long = "alpha-seq", default_value = "geometric:0.5")]
        alpha_seq: String,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 1 << 16)]
        samples: usize,
        /// Width of the smoothed corners relative to the segment (0 keeps corners).
        #[arg(long)]
        smoothing: Option<f64>,
    },
    /// Graph of the integral of a Haar series (exponent from --alpha).
    Haar {
        #[arg(long, value_enum, default_value_t = LawArg::Holder)]
        law: LawArg,
        #[arg(long, default_value_t = 16)]
        depth: usize,
        #[arg(long, default_value_t = 1 << 16)]
        grid: usize,
        #[arg(long, default_value_t = 0.02)]
        amplitude: f64,
        /// Seeded random signs (from --seed) instead of positive coefficients.
        #[arg(long = "random-signs")]
        random_signs: bool,
    },
    /// Graph of a primitive of dist(x, E)^s for a Cantor set E.
    Cantor {
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        /// Gap fractions a_n = q^{-(n+1)}.
        #[arg(long, default_value_t = 3.0)]
        q: f64,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 1 << 16)]
        grid: usize,
        #[arg(long, default_value_t = 0.05)]
        amplitude: f64,
    },
    /// Piecewise linear zigzag graph.
    Sawtooth {
        #[arg(long, default_value_t = 0.5)]
        slope: f64,
        #[arg(long, default_value_t = 8)]
        teeth: usize,
        #[arg(long, default_value_t = 1 << 16)]
        count: usize,
    },
    /// Gaussian bump graph.
    Bump {
        #[arg(long, default_value_t = 0.02)]
        height: f64,
        #[arg(long, default_value_t = 0.15)]
        width: f64,
        #[arg(long, default_value_t = 1 << 16)]
        count: usize,
    },
    /// Coordinate d-plane in R^n (uses --n and --d, default a line in the plane).
    Flat {
        #[arg(long, default_value_t = 10_000)]
        side: usize,
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
        /// Uniform random points from --seed instead of a lattice.
        #[arg(long)]
        jitter: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LawArg {
    Holder,
    LogLipschitz,
}

#[derive(Debug, Args)]
pub struct BetaArgs {
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Sup)]
    pub objective: ObjectiveArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    Sup,
    L1,
    L2,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Σ_0 grid `lo:hi:count` per axis.
    #[arg(long, default_value = "-0.4:0.4:201", allow_hyphen_values = true)]
    pub grid: String,
}

#[derive(Debug, Args)]
pub struct RegularityArgs {
    /// Also write the Hölder bins as CSV (target, distance, max increment, pairs).
    #[arg(long = "bins-csv")]
    pub bins_csv: Option<PathBuf>,
}
