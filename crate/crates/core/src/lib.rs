//! Quantum Fraunhofer diffraction through a planar aperture.
//!
//! The diffraction field is obtained from the incident field's normal
//! characteristic function by a linear substitution of its arguments. On
//! top of that transform the crate provides photon-number observables,
//! the Schlienz–Mahler correlation measure, and a truncated Fock-space
//! oracle that checks every closed form by brute force.

// `!(x > 0.0)` rejects NaN together with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aperture;
pub mod diffraction;
pub mod entanglement;
pub mod observables;
pub mod oracle;
pub mod quadrature;
pub mod scenario;
pub mod special;
pub mod states;
