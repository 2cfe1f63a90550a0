//! k-MS (k-Morphological Sets) clustering.
//!
//! The algorithm discretizes a 2-D dataset into a boolean occupancy grid,
//! seeds every occupied cell with a unique label, and repeatedly dilates the
//! labels under the occupancy mask with a structuring element whose reach is
//! scaled by a growing factor `delta`. Passes that change nothing let `delta`
//! grow; passes that merge labels reset it. The loop stops as soon as a pass
//! changes nothing and at most `k` distinct labels remain, so the output has
//! `k` or fewer clusters without any randomness.
//!
//! The crate also ships a Lloyd k-Means baseline, noise removal by cluster
//! size, deterministic rendering, and a benchmark harness; the `kms` binary
//! exposes all of it on the command line.

pub mod baseline;
pub mod error;
pub mod grid;
pub mod harness;
pub mod kms;
pub mod morphology;
pub mod postprocess;

pub use error::{Error, Result};
