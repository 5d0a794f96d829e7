//! Semidefinite programs over real symmetric and complex Hermitian blocks.
//!
//! Problems are stated in terms of block entries ([`SdpProblem::entry`]) and
//! linear equalities between them. [`InteriorPoint`] solves them after a
//! presolve that merges variables tied by simple equalities, so symmetry
//! constraints and copies of the same matrix cost almost nothing.

mod backend;
mod error;
mod ipm;
mod presolve;
mod problem;

pub use backend::{InteriorPoint, SdpSolution, SolveStatus, SolverBackend, SolverStats};
pub use error::{Result, SdpError};
pub use problem::{
    BlockId, BlockSpec, ComplexForm, ConicExport, EqConstraint, Field, LinearForm, SdpProblem,
    Sense,
};
