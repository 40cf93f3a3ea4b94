//! Spectral differential geometry on flat complex 3-tori and a Newton–continuation
//! solver for the coupled balanced-metric / Hermitian–Yang–Mills / anomaly system.
//!
//! The crate is `no_std` (with `alloc`). File formats, configuration and the
//! command-line driver live in the companion `balanced-cli` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod bundle;
pub mod continuation;
pub mod error;
pub(crate) mod fft;
pub mod field;
pub mod flat;
pub mod form;
pub mod hermitian;
pub mod lattice;
pub mod linearized;
pub mod math;
pub mod sample;
pub mod system;

pub use error::{Error, Result};
pub use field::{Direction, Field};
pub use form::{EndForm, FormField, TopForm};
pub use lattice::{Axis, Lattice, Mode};
pub use math::C64;
