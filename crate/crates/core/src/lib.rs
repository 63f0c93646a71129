//! Simulation library for ground-Rydberg Rabi flopping of few-atom ⁸⁷Rb
//! samples held in a far-off-resonance optical trap.
//!
//! The crate is organised bottom-up:
//!
//! * [`angular`] - Clebsch-Gordan, 6j and Wigner-d algebra (Condon-Shortley
//!   phases, descending-m ordering everywhere).
//! * [`levels`] - quantum-defect energies, Förster defects, Zeeman shifts and
//!   semiclassical radial matrix elements.
//! * [`vdw`] - the 36-dimensional two-atom van der Waals operator for
//!   `43d5/2 + 43d5/2` and its eigenmodes.
//! * [`pulses`] - single-atom two-photon excitation and pulse sequences.
//! * [`ensemble`] - Monte Carlo many-atom dynamics with pairwise shifts.
//! * [`trapstats`] - loading, detection, preselection and thermometry.
//! * [`analysis`] - damped-cosine fitting and visibility.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod angular;
pub mod constants;
pub mod ensemble;
mod error;
pub mod levels;
pub mod mc;
pub mod pulses;
pub mod trapstats;
pub mod vdw;

pub use error::{Error, Result};
