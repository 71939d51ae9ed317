//! Boundary-integral solver for the planar Lamé transmission problem with
//! inclusions of arbitrary (including extreme) elastic contrast.
//!
//! Layers, bottom-up: [`material`] and [`geometry`] describe the problem,
//! [`kernels`] evaluates the Kelvin matrix, [`potentials`] assembles Nyström
//! discretizations of the single-layer and Neumann–Poincaré operators,
//! [`freespace`] and [`bvp`] solve transmission and boundary value problems,
//! and [`emt`] / [`asymptotics`] compute elastic moment tensors and the
//! small-inclusion expansion built from them.

pub mod asymptotics;
pub mod bvp;
pub mod emt;
pub mod error;
pub mod freespace;
pub mod geometry;
pub mod kernels;
pub mod material;
pub mod numerics;
pub mod potentials;
pub mod quadrature;

pub use error::{Error, Result};
pub use geometry::{sample_grid, BoundaryGrid, Curve, CurveKind, InclusionPlacement, Point};
pub use material::{ContrastPair, LameParams};
pub use nalgebra::Matrix2;
