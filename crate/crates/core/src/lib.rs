//! Physics-informed neural network training engine.
//!
//! The crate is organised bottom-up:
//!
//! * [`autodiff`]: dual numbers, a reverse-mode tape and a batched tensor tape.
//! * [`network`]: dense networks and hard-constraint wrappers.
//! * [`optim`]: SGD, ADAM, L-BFGS and line search.
//! * [`pde`]: residual operators, series solutions and finite-difference references.
//! * [`sampling`]: collocation point generation.
//! * [`training`]: loss assembly and the training loop.
//! * [`metrics`]: error norms, error fields and rate fits.
//! * [`config`]: experiment configuration files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod config;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod pde;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
pub use grid::GridField;
