//! Light storage and retrieval in a cavity-EIT quantum memory backed by a
//! cylindrical ion Coulomb crystal.
//!
//! The crate integrates the semiclassical write-store-read dynamics of a
//! probe field coupled to radially discretized collective atomic coherences,
//! designs the analytically optimal control pulses, and provides the
//! parameter sweeps and amplitude optimization needed to map how the
//! transverse mode profiles of probe and control determine the memory
//! efficiency.

pub mod config;
pub mod dynamics;
pub mod experiments;
pub mod model;
pub mod ode;
pub mod pulses;
pub mod report;
pub mod validate;

pub use num_complex::Complex64;
