//! Grid mutual information, MIC/MIC* characteristic matrices, and a Monte
//! Carlo lab for the bounds that make the sample statistic a consistent
//! estimator of its population counterpart.
//!
//! Population quantities are computed exactly from synthetic joint models
//! ([`dist`]), so every experiment compares an exact population side against
//! a seeded sample side.
//!
//! Module map:
//! - [`dist`]: joint models on the unit square, seeded sampling.
//! - [`grids`]: grid partitions, equipartitions, induced distributions,
//!   snapping and straddle masses.
//! - [`info`]: mutual information, total variation, bound shapes.
//! - [`mic`]: characteristic matrices over a finite candidate family.
//! - [`bounds_lab`]: Chernoff calculators and the trial runners.

pub mod bounds_lab;
pub mod dist;
pub mod error;
pub mod grids;
pub mod info;
pub mod mic;
pub mod rng;

pub use error::{Error, Result};
