//! Ground-truth map generators.

pub mod arap;
pub mod param;
pub mod patch;
pub mod sampling;
