//! Lattice Boltzmann schemes for the linearized Euler equations.
//!
//! Velocity sets and equilibria live in [`lattice`] and [`kinetic`], time
//! stepping in [`solver`], the von Neumann analysis in [`stability`], exact
//! solutions and initial data in [`reference`], and error studies in
//! [`harness`]. The `lee-lbm` binary wraps everything in [`cli`].

pub mod cli;
pub mod harness;
pub mod kinetic;
pub mod lattice;
pub mod linalg;
pub mod reference;
pub mod snapshot;
pub mod solver;
pub mod stability;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] lattice::LatticeError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Stability(#[from] stability::StabilityError),
    #[error(transparent)]
    Reference(#[from] reference::ReferenceError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
    #[error(transparent)]
    Snapshot(#[from] snapshot::SnapshotError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}
