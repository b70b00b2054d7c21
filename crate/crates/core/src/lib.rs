//! Distributed compressive spectrum sensing.
//!
//! A fusion center collects compressed autocorrelation measurements from a
//! grid of sensors whose PSDs share a sparse common component within each
//! group, and reconstructs every PSD by convex sparse recovery. The crate
//! provides the operator chain between autocorrelation, PSD, and edge
//! domains, scenario generation, the stacked joint-sparsity systems, the
//! solvers (BPDN, equality-constrained weighted ℓ₁, circulant least
//! squares), closed-form common-component estimation, a circulant link
//! distortion model with pilot-based filter estimation, the four
//! reconstruction methods, and a grid experiment harness that emits CSV.
//!
//! Independent solves and experiment cells run on rayon when the `parallel`
//! feature (default) is enabled; disabling it yields a dependency-free
//! sequential build with identical outputs.

pub mod channel;
pub mod common;
pub mod error;
pub mod harness;
pub mod operators;
pub mod recon;
pub mod rng;
pub mod scenario;
pub mod sensing;
pub mod solver;

mod exec;
mod fft;

pub use error::{Error, Result};
pub use operators::{
    autocorr_of, build_operators, edge_of, psd_of, AutocorrVector, EdgeVector,
    OperatorSet, PsdVector, EDGE_EPS,
};
pub use scenario::{generate_group, GroupParams, GroupScenario};
