//! Unfitted finite elements on a structured background triangulation.
//!
//! The fluid domain is described by a level set `phi` (solid where `phi > 0`).
//! Velocities are written as `u_h = phi_h w_h + chi_h (U + psi x r)` (plus an
//! optional lifting of Dirichlet data), so boundary conditions on the immersed
//! interface hold by construction and every integral lives on whole mesh cells
//! or facets. Stabilization combines a facet ghost penalty on normal
//! derivatives with a least-squares residual on cut cells.
//!
//! This crate is `no_std` (with `alloc`). Linear solves, parallel drivers and
//! file formats live in the `phifem` crate.
#![no_std]

extern crate alloc;

pub mod assembly;
pub mod basis;
pub mod error;
pub mod error_analysis;
pub mod geometry;
pub mod math;
pub mod mesh;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};
pub use math::Point;
