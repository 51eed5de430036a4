//! Regularity diagnostics: Hölder exponent estimation, the lacunary tent
//! series check, and the end-to-end predict/verify pipeline.

pub mod holder;
pub mod limit;
pub mod pipeline;

pub use holder::{estimate_holder, HolderBin, HolderFit, HolderOptions};
pub use limit::{holder_limit_check, tent_series, HolderLimitCase, HolderLimitReport};
pub use pipeline::{
    predict_and_verify, sigma0_samples, JonesSup, PipelineConfig, PipelineReport, RegularityReport, Target, Verdict, VerdictRule,
};
