//! Drivers for `phifem-core`: sparse LU solves, parallel assembly, studies,
//! configuration and file output.

pub mod config;
pub mod error;
pub mod output;
pub mod parallel;
pub mod solver;
pub mod study;

pub use error::{Error, Result};
