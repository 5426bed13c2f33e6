//! Solvers and experiment tooling for sparse signal recovery with a
//! ridge-regularized cardinality objective, built on `sparsecs-core` with
//! the Clarabel interior-point backend.

// links the BLAS/LAPACK used by Clarabel's PSD cones
extern crate openblas_src;

pub mod backend;
pub mod cli;
pub mod clock;
pub mod experiments;
pub mod io;

pub use backend::ClarabelSolver;
pub use sparsecs_core as core;
