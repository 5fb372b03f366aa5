//! Numerical core for zonal optimization of radial distribution networks
//! with multiple microgrids.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the network model and
//! bundled 33-bus case, Newton-Raphson power flow with voltage sensitivities,
//! sensitivity-based zoning, the per-zone fuzzy multi-objective LinDistFlow
//! programs, a dense primal-dual interior-point solver, the consensus ADMM
//! coordinator with its penalty strategies, and the per-microgrid 24-hour
//! economic dispatch. File formats, CSV output and the command-line driver
//! live in the `zonalopt` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod admm;
pub mod cvx;
pub mod dispatch;
pub mod error;
pub mod network;
pub mod opf;
pub mod pipeline;
pub mod powerflow;
pub mod profiles;
pub mod scenario;
pub mod zoning;

pub use error::{Error, Result};
pub use network::{Branch, Bus, BusKind, Network, PvUnit};
pub use scenario::Scenario;
