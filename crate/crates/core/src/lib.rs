//! Discrete fiber-network mechanics with a localized orthogonal decomposition
//! (LOD) multiscale solver.
//!
//! The crate is organised along the pipeline it implements:
//!
//! - [`network`] generates structured, perturbed and unordered fiber networks,
//!   assigns material coefficients and prunes mechanisms.
//! - [`assembly`] turns a network into the linear force-displacement system
//!   `K u = F` and applies the two boundary-value problems.
//! - [`multiscale`] builds the coarse bilinear space, the localized correctors
//!   and the multiscale Galerkin solve.
//! - [`analysis`] computes reference solutions, error norms and convergence
//!   studies.
//! - [`cli`] wires everything into the `fibernet` command-line tool.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod multiscale;
pub mod network;

pub use error::{Error, Result};
