//! Exact one-hidden-layer ReLU networks for the piecewise quadratic value
//! functions and Q-functions of one-dimensional constrained linear MPC.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! * the data model ([`Interval`], [`PwqFunction`], [`PwaFunction`],
//!   [`ReluNetwork`], [`MpcProblem`]),
//! * an exact dynamic-programming solver for the explicit MPC law
//!   ([`mpc::dp_solve`]) and a grid-search oracle that certifies it
//!   ([`oracle::brute_force_value`]),
//! * the network constructions ([`build`]) and their forward evaluation
//!   ([`eval`]),
//! * a verification harness ([`verify`]), a small regression trainer
//!   ([`train`]) and a hand-derived two-dimensional example ([`showcase`]).
//!
//! File formats and the command line live in the `pwqnet` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod build;
pub mod eval;
pub mod interval;
pub mod matrix;
pub mod mpc;
pub mod network;
pub mod oracle;
pub mod piecewise;
pub mod problem;
pub mod showcase;
pub mod train;
pub mod verify;

mod error;

pub use error::{Error, Result};
pub use interval::Interval;
pub use matrix::Matrix;
pub use network::{FeatureMap, Layer, ReluNetwork};
pub use piecewise::{Affine, PwaFunction, PwaPiece, PwqFunction, PwqPiece, Quadratic};
pub use problem::{MpcProblem, QFunctionSpec};

/// Absolute tolerance for continuity of piecewise functions at breakpoints.
pub const EPS_CONT: f64 = 1e-9;

/// Componentwise tolerance under which adjacent pieces are merged.
pub const EPS_MERGE: f64 = 1e-9;

/// Points this close to a domain boundary are treated as inside it.
pub const EPS_DOMAIN: f64 = 1e-12;
