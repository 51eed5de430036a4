//! The parametrization `f = lim σ_{K-1} ∘ ... ∘ σ_0` of the set from its reference plane.

mod distortion;
mod flow;
mod mesh;
mod sigma;

pub use distortion::{distortion_report, Bound, DistortionReport, DistortionRow, BOUNDS};
pub use flow::{flow, flow_map, sigma0_point, tail_bound, FlowJet, DOMAIN_RADIUS};
pub use mesh::{invert, invert_from, invert_with_tolerance, surface_mesh, GridSpec, Inverse, Mesh, INVERT_MAX_ITERATIONS, INVERT_TOLERANCE};
pub use sigma::{sigma, sigma_jet, SigmaJet};
