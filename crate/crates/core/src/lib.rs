//! Stochastic Anderson mixing (SAM) optimizers and their test bench.
//!
//! The crate is organised bottom-up:
//!
//! * [`smallmat`]: dense kernels for the small `m x m` / `2m x 2m` systems.
//! * [`history`]: the sliding window of iterate and residual differences.
//! * [`mixer`]: AM, RAM, AdaSAM, AdaSAM0 and pAdaSAM updates.
//! * [`baselines`]: SGD, SGD with momentum and Adam (also used as fallback
//!   and preconditioner).
//! * [`vr`]: the SVRG-corrected driver (SAM-VR).
//! * [`krylov`]: reference GMRES used as an oracle on quadratics.
//! * [`problems`]: gradient oracles for synthetic and CSV-backed problems.
//! * [`harness`]: experiment configs, training loop, traces and comparisons.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod harness;
pub mod history;
pub mod krylov;
pub mod mixer;
pub mod problems;
pub mod rng;
pub mod smallmat;
pub mod vecops;
pub mod vr;

pub use error::{Error, Result};
