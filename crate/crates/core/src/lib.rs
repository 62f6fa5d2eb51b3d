//! Terrain-based benchmarking of derivative-free global optimisers.
//!
//! An [`ElevationGrid`](terrain::ElevationGrid) is turned into a continuous
//! objective by bilinear interpolation. The discrete landscape (steepest-ascent
//! graph, local optima, basins of attraction) is enumerated by [`optima`].
//! Optimisers from [`optimizers`] are run through the [`harness`], which
//! records every evaluation and applies the global termination criteria.
//! Runs are scored with the ERT/GERT family in [`measures`], tuned by
//! [`tuner`] and turned into plot data by [`reports`].

pub mod error;
pub mod harness;
pub mod measures;
pub mod optima;
pub mod optimizers;
pub mod pipeline;
pub mod reports;
pub mod rng;
pub mod terrain;
pub mod tuner;
mod util;

pub use error::{Error, Result};
