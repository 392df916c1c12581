//! Classical simulation of a hybrid variational solver for particle-hole
//! symmetric single-impurity Anderson models.
//!
//! The pipeline prepares a ground state with a number-conserving ansatz
//! under optional shot noise ([`vqe`]), corrects its energy with a moment
//! expansion ([`qcm`]) and rebuilds the impurity Green's function as a
//! continued fraction ([`greens`]). Every stage can be checked against the
//! exact-diagonalization reference in [`exact`].

pub mod config;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod experiment;
pub mod greens;
pub mod hamiltonian;
pub mod qcm;
pub mod rng;
pub mod statevector;
pub mod vqe;

pub use error::{Error, Result};
