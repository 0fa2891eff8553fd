//! Directed spanning forest (DSF) on a homogeneous Poisson point process in
//! the upper half-space model of hyperbolic space.
//!
//! The pipeline is: [`ppp::sample`] a Poisson cloud in a finite window,
//! [`forest::build`] the parent map with boundary certification, then query
//! level sets, trajectories and fluctuation statistics through [`traversal`],
//! and aggregate Monte Carlo estimates with [`stats`].

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod scalar;
pub mod hypgeom;
pub mod json;
pub mod ppp;
pub mod forest;
pub mod traversal;
pub mod stats;
pub mod cli;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases for the generic core.
pub type Point = hypgeom::HPoint<f64>;
pub type Cloud = ppp::PointCloud<f64>;
pub type Dsf = forest::Forest<f64>;
pub type Crossings = traversal::LevelSet<f64>;
