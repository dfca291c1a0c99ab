//! Numerical laboratory for cone multipliers and their maximal, square and
//! weighted estimates on periodic grids.

pub mod bumps;
pub mod decompose;
pub mod error;
pub mod field;
pub mod fit;
pub mod kernels;
pub mod multipliers;
pub mod operators;
pub mod weights;
pub mod quad;
pub mod rng;
pub mod special;
pub mod trace;

pub use error::{Error, Result};
pub use field::{Field, Grid, Sampling, Spectrum};
pub use multipliers::MultiplierSpec;
pub use num_complex::Complex64;
