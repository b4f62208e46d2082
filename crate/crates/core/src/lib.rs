//! Linear-response g-matrix engine for hole spin qubits.
//!
//! A gated silicon device is described by box regions and gates
//! ([`device`]), discretized on a uniform mesh ([`mesh`]), its electrostatic
//! response computed by a finite-volume solver ([`electrostatics`]), and the
//! hole states obtained from a six-band k.p model ([`kp`], [`spectrum`]).
//! The [`gmatrix`] module turns three zero-field solutions into the
//! g-matrix, its gate derivative and Rabi frequencies for any field
//! orientation.

pub mod device;
pub mod error;
pub mod kp;
pub mod mesh;
pub mod units;

pub use error::{Error, Result};
pub use {nalgebra, num_complex};
pub mod electrostatics;
pub mod gmatrix;
pub mod pipeline;
pub mod presets;
pub mod reference;
pub mod spectrum;
pub mod symmetry;
