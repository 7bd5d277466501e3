//! Symbolic and numeric engine for fractional constrained variational
//! problems: canonical momenta, degenerate Legendre transforms, constraint
//! analysis, and Grünwald–Letnikov integration.

pub mod canonical;
pub mod constraints;
pub mod error;
pub mod fracnum;
pub mod fracsolve;
pub mod problem;
pub mod report;
pub mod ratlin;
pub mod symcore;
pub mod varproblem;

pub use error::{Error, Result};
