//! Exact-arithmetic witness families and defect certification for the
//! `SL(2,Z)` action on the projective line and on `Z^2`.

pub mod certify;
pub mod error;
pub mod farey_walk;
pub mod fast;
pub mod group_measures;
pub mod higson;
pub mod modular_group;
pub mod projective_line;
pub mod suites;
pub mod witness;
pub mod zeta_builder;

pub use error::{Error, Result};
