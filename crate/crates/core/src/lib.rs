//! Certifiably optimal compressed sensing.
//!
//! Given a sensing matrix `A`, measurements `b`, a squared-residual budget
//! `epsilon` and an L2 weight `gamma`, the problems solved here are
//!
//! ```text
//! minimize   ||x||_0 + (1/gamma) ||W x||_2^2
//! subject to ||A x - b||_2^2 <= epsilon
//! ```
//!
//! together with their convex relaxations (weighted basis pursuit denoising,
//! the perspective relaxation, a Big-M strengthening, and a degree-1
//! sum-of-squares semidefinite relaxation), greedy rounding, the usual
//! benchmark heuristics, and a branch-and-bound search that certifies
//! optimality.
//!
//! The crate is `no_std` and only needs `alloc`. Conic programs are handed to
//! an implementation of [`conic::ConicSolver`], and wall time is read through
//! [`bnb::Clock`]; both are supplied by the caller.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bnb;
pub mod conic;
mod error;
pub mod heuristics;
pub mod index_set;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod relaxations;
pub mod rounding;
pub mod sos;

pub use error::Error;
pub use index_set::IndexSet;
pub use problem::{ProblemInstance, SolutionVector, DEFAULT_SUPPORT_THRESHOLD};

pub type Result<T, E = Error> = core::result::Result<T, E>;
