//! Numerical laboratory for the low-Mach, low-Froude limit of heat-conducting
//! compressible flow around rough obstacles.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acoustics;
pub mod constitutive;
pub mod equilibrium;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod nsf;
pub mod oberbeck;
pub mod spectral;
pub mod staggered;

pub use error::{Error, Result};
