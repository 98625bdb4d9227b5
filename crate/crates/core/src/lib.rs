//! Variational TSP optimization on a symmetry-reduced binary-register encoding.
//!
//! The crate is organized bottom-up:
//!
//! - [`instances`]: random symmetric instances and the exhaustive tour oracle
//! - [`encoding`]: fixed-start reduction, register layout, state classification
//! - [`hamiltonian`]: the diagonal register Hamiltonian, its Pauli-Z expansion
//!   and the one-hot QUBO baseline cost
//! - [`simulator`]: a dense statevector with RY, CZ, X and CSWAP gates
//! - [`ansatz`]: the register-swap ansatz, parameter-shift gradients, Adam and
//!   depth sweeps
//! - [`dnc`]: product-state (divide-and-conquer) objective with shot sampling
//!   and SPSA
//! - [`mitigation`]: readout confusion models, calibration, IBU and inversion
//!
//! Batch workloads go through [`exec::Execution`], which uses rayon when the
//! `parallel` feature is enabled and falls back to a plain loop otherwise.

pub mod ansatz;
pub mod dnc;
pub mod encoding;
pub mod error;
pub mod exec;
pub mod hamiltonian;
pub mod instances;
pub mod mitigation;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use exec::Execution;
