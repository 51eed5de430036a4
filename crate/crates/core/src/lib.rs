//! Multiscale β numbers, coherent collections of balls and planes, and the
//! `C^{1,α}` parametrization of flat point clouds built from them.

pub mod beta;
pub mod ccbp;
pub mod cloud;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod generators;
pub mod geometry;
pub mod io;
pub mod net;
pub mod param;
pub mod partition;
pub mod spatial;

pub use cloud::{Normalization, PointCloud};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use geometry::{plane_angle, plane_dist, scale_radius, AffinePlane, Ball, Point};
pub use net::{build_net, MultiscaleNet};
