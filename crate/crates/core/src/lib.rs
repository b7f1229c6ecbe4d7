//! Master-equation dynamics of classical Ising models and their stoquastic
//! quantum counterparts.
//!
//! A detailed-balance generator `W` at inverse temperature `β` is similar to
//! the real symmetric matrix `H = -e^{βE/2} W e^{-βE/2}`, so relaxation
//! rates of the classical chain are energy levels of `H`. The reverse
//! direction takes the Perron–Frobenius ground state `φ` of a stoquastic
//! `H`, reads off the classical energy `-2 log φ` through a Walsh expansion,
//! and rebuilds a generator. On top of that the crate provides dense and
//! Lanczos eigensolvers, gap-scaling sweeps and fits, and simulated vs
//! quantum annealing runs on full state vectors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod dynamics;
pub mod error;
pub mod format;
pub mod mapping;
pub mod model;
pub mod sparse;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
