//! Measure-valued simulation of the aggregation equation
//! `d rho / dt = div((grad W * rho) rho)` for pointy interaction potentials.
//!
//! The core solver is a node-collocated upwind scheme on Cartesian grids
//! ([`upwind`]) with a forward semi-Lagrangian variant on triangular meshes
//! ([`simplicial`]). Measures stay nonnegative with unit mass at every step
//! under a strict 1/2-CFL condition, and converge at rate 1/2 in Wasserstein
//! distance. Companion modules supply interaction potentials, sticky-particle
//! reference solutions, error metrics, comparison schemes, and the experiment
//! driver behind the `aggsim` binary.

pub mod alt;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod oracle;
pub mod potential;
pub mod record;
pub mod simplicial;
pub mod upwind;

pub use error::{Error, Result};
