//! Symmetry analysis, fidelity bounds, pulse synthesis and spectral
//! identification for XX spin networks driven through one pendant coupling.
//!
//! Spin indices are 1-based in every public interface.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod network;
pub mod operators;
pub mod pulses;
pub mod symmetries;
pub mod sysid;

pub use error::{Error, Result};
pub use network::{parse_network, SpinNetwork};
