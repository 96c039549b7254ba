//! Collective radiation of dipole-coupled emitter rings.
//!
//! Emitters sit on rings with rotationally symmetric dipole orientations and
//! interact through the free-space electromagnetic Green's tensor. The crate
//! builds the resulting non-Hermitian Hamiltonian in the one- and
//! two-excitation manifolds, diagonalizes it, evolves pure states, couples
//! the modes of neighbouring rings and evaluates the radiated field.
//!
//! Units: lengths in λ0 (so `k0 = 2π`), rates and energies in Γ0, times in
//! 1/Γ0.
//!
//! ```
//! use nanoring::geometry::{PolSpec, RingSpec};
//! use nanoring::spectrum::ring_modes;
//!
//! let modes = ring_modes(&RingSpec::new(8, 0.1, PolSpec::transverse())).unwrap();
//! // the darkest mode of an even ring carries m = N/2
//! assert_eq!(modes.labels.as_ref().unwrap()[0], 4);
//! assert!(modes.min_rate() < 1e-3);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod spectrum;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::{DipoleArray, PolSpec, RingSpec};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    mod coupling {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/transport.md")]
    mod transport {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
