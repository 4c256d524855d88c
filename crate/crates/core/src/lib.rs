//! Numerical laboratory for fractal invariant sets of dissipative flows.
//!
//! The crate is organised around a handful of independent toolkits:
//!
//! * [`dynamics`]: reference flows, RK4 integration, divergence and Lyapunov spectra.
//! * [`geometry`]: box-counting and correlation dimensions, sparseness probes,
//!   delay embedding and time-average statistics.
//! * [`cantor`]: exact base-3 digit arithmetic and the Cantor-set sparseness experiments.
//! * [`symbolic`]: bivalent partitions, symbol strings and neighbourhood sample spaces.
//! * [`qstrings`]: signed block permutations on A/B strings realising the quaternion group.
//! * [`liouville`]: upwind finite-volume transport of probability densities.
//! * [`cli`]: the seeded experiment runner behind the `isl` binary.

pub mod cantor;
pub mod cli;

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod liouville;
pub mod qstrings;
pub mod seed;
pub mod symbolic;

pub use error::{Error, Result};
