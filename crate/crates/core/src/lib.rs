//! Design and verification toolkit for analogue-gravity simulators built from
//! dc-SQUID array transmission lines.
//!
//! - [`squid`]: flux ↔ propagation-speed algebra of a single SQUID cell.
//! - [`spacetime`]: the simulated 1+1D metric, null-geodesic times, horizons.
//! - [`designer`]: per-SQUID flux designs and feasibility diagnostics.
//! - [`lattice`]: leapfrog LC-ladder solver used as an independent
//!   time-of-flight check on a design.
//! - [`cli`]: the `chrono-squid` command-line front end.

pub mod cli;
pub mod config;
pub mod designer;
pub mod lattice;
pub mod quadrature;
pub mod roots;
pub mod spacetime;
pub mod squid;
