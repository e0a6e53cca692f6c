//! Persistent homology of planar Wiener sausages.
//!
//! A *Wiener sausage* is the radius-`r` neighborhood of the range of a planar
//! path; letting `r` vary produces the offset filtration of the path's trace.
//! This crate simulates drifted planar Brownian motion, builds the alpha
//! filtration of sampled point clouds (the exact combinatorial model of the
//! union-of-balls filtration), computes persistence diagrams and bottleneck
//! distances, and cross-checks everything against an independent pixel-grid
//! homology oracle.
//!
//! On top of that sits the regeneration machinery for drifted Brownian
//! motion: ladder-level cuts of the drift coordinate decompose a path into
//! i.i.d. blocks, which turns time averages of smoothed persistence
//! functionals into renewal-reward estimates. The [`experiments`] module
//! wires the pieces into reproducible Monte Carlo runs behind the `sausage`
//! command-line tool.

pub mod experiments;
pub mod filtration;
pub mod geometry;
pub mod gridoracle;
pub mod io;
pub mod metrics;
pub mod pathsim;
pub mod persistence;
pub mod regen;
pub mod rng;

pub use geometry::{Point, PointCloud};
pub use pathsim::{DriftedBmParams, Partition, PathSample};
pub use persistence::{BettiCurve, PersistenceDiagram, Weight};
