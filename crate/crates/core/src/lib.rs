//! Numerical toolkit for equivalent smooth flows.
//!
//! The crate builds explicit flows whose periodic-orbit growth and entropy
//! change under time reparameterization, and the machinery needed to check
//! those claims at finite scale:
//!
//! * [`bumpkit`]: flat bump functions, smooth steps and the slow-down profile `w`.
//! * [`diskflow`]: the radii ladder on the unit disk, the disk fields and the
//!   exact periodic-orbit census.
//! * [`flowsim`]: adaptive Runge–Kutta integration, sections, occupation times
//!   and separated-set entropy estimates.
//! * [`suspension`]: suspension flows over circle rotations and torus
//!   automorphisms, time changes, additive functions and Abramov checks.
//! * [`tearkit`]: the planar "tear" chart, its rotated high-dimensional fields
//!   and the embedded disk fields.
//!
//! Everything here is `no_std` with `alloc`; IO lives in the companion crate.

#![no_std]
// Whenever std ends up in the build graph (tests, or a dependent that enables
// std features) its inherent float methods shadow the `num_traits::Float`
// ones and the imports look unused.
#![allow(unused_imports)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![warn(clippy::std_instead_of_alloc)]
#![warn(clippy::std_instead_of_core)]

extern crate alloc;

pub mod bumpkit;
pub mod diskflow;
mod error;
pub mod flowsim;
pub mod quad;
pub mod suspension;
pub mod tearkit;

pub use error::{Error, Result};
