//! Numerical laboratory for the Berger plate equation
//!
//! ```text
//! uₜₜ + Δ²u + (γ - ‖∇u‖²)Δu = p
//! ```
//!
//! with nonlinear boundary damping, on a hinged rectangle or interval
//! (bending moment `Δu = -D(∂ν uₜ)`) and on a clamped-free beam (septic shear
//! feedback at the free end).
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: domains, meshes, boundary classification, the flux field.
//! - [`field`] and [`operators`]: grid functions with ghost closures, the
//!   stencils and quadratures, assembled unknown-space matrices.
//! - [`damping`]: damping laws and sampled verification of their growth
//!   assumptions.
//! - [`dynamics`]: implicit-midpoint time stepping with Picard iteration.
//! - [`energetics`]: energy functionals, balance audits, the potential bound.
//! - [`longtime`]: multiplier audits, absorbing-ball experiments, difference
//!   of solutions.
//! - [`cli`]: run configuration, execution and output files.
//!
//! A guide with worked examples lives in `book/`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod cli;
pub mod damping;
pub mod dynamics;
pub mod energetics;
pub mod error;
pub mod field;
pub mod geometry;
pub mod longtime;
pub mod operators;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/getting-started.md")]
    pub mod getting_started {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    pub mod meshes {}
    #[doc = include_str!("../../../book/src/operators.md")]
    pub mod operators {}
    #[doc = include_str!("../../../book/src/damping.md")]
    pub mod damping {}
    #[doc = include_str!("../../../book/src/time-stepping.md")]
    pub mod time_stepping {}
    #[doc = include_str!("../../../book/src/energy.md")]
    pub mod energy {}
    #[doc = include_str!("../../../book/src/long-time.md")]
    pub mod long_time {}
}
