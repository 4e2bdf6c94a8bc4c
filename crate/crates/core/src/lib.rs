//! Spontaneous emission and single-photon exchange between two-level atoms
//! sitting in the foci of parabolic and prolate-ellipsoidal mirrors.
//!
//! The crate computes the cavity field modes that couple to axial dipoles at the
//! foci, the Laplace-domain memory kernels built from them, Purcell-modified decay
//! rates, the one-excitation dynamics (by direct integration and by Laplace
//! inversion / photon-path expansion) and the normally ordered energy density of
//! the emitted photon.

pub mod error;
pub mod field;
pub mod dynamics;
pub mod geometry;
pub mod kernel;
pub mod modes;
pub mod ode;
pub mod quadrature;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};

/// Double-precision aliases for the generic geometry types.
pub type Cavity = geometry::CavitySpec<f64>;
pub type Atom = geometry::AtomSpec<f64>;
pub type Constants = geometry::PhysicalConstants<f64>;
