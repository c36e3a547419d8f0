//! Weyl sums over general polynomial families: exact phase evaluation,
//! completion majorants, exponent arithmetic, discrepancy and large-value
//! census tools.

pub mod census;
pub mod discrepancy;
pub mod exponents;
pub mod expsum;
pub mod polyfam;
pub mod torus;

pub use torus::{Phase, TorusPoint};
