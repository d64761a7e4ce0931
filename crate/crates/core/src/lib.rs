//! Numerical toolkit for local asymptotic normality of qubit ensembles.
//!
//! The `n`-qubit family `(ρ^{u/√n})^{⊗n}` is handled block by block through
//! its SU(2) decomposition, compared against displaced thermal states of a
//! truncated oscillator, and mapped between the two via explicit channels.

pub mod channels;
pub mod error;
pub mod irreps;
pub mod measurements;
pub mod numerics;
pub mod oscillator;
pub mod qubit_model;

pub use error::{Error, Result};
pub use irreps::{HalfInteger, LocalParam};
pub use qubit_model::ModelParams;
