//! Numerical core of kamforge: structured linear algebra over gl+/gl-,
//! non-degeneracy and Diophantine checks, co-rotating coverings and the
//! truncated Fourier homological-equation solver.
//!
//! The crate is `no_std` and only needs an allocator.
#![no_std]

extern crate alloc;

pub mod diophantine;
pub mod error;
pub mod fourier;
pub mod homological;
pub mod covering;
pub mod linalg;
pub mod models;
pub mod nondegen;
pub mod poly;
pub mod presets;
pub mod revlin;
#[cfg(feature = "serde")]
pub mod serde_rows;

pub use error::{Error, Result};
pub use linalg::Tolerances;
