//! Cavity QED of a single two-level atom coupled to the two counter-propagating
//! whispering-gallery modes of a fiber-coupled microtoroid.
//!
//! All rates and detunings are frequencies `rate / 2π` in MHz. Lengths are in
//! nm unless a field name says otherwise.
//!
//! * [`model`]: weak-excitation steady state, forward transmission, closed
//!   forms at the cavity resonance and the dressed-state eigenvalues.
//! * [`master`]: Lindblad steady state in a truncated Fock space, used as an
//!   oracle for the linear model and for saturation.
//! * [`geometry`]: evanescent mode functions and position-dependent coupling.
//! * [`transit`]: Monte Carlo of falling atoms, photon counting and the
//!   derived statistics (events, histograms, cross-correlation, sweeps).
//! * [`fitting`]: parameter extraction from transmission traces and
//!   detuning curves.

pub mod error;
pub mod fitting;
pub mod geometry;
pub mod master;
pub mod model;
pub mod rng;
pub mod transit;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
