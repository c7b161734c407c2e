//! Quantum Fisher information, divergences and large-deviation estimation
//! experiments for one-parameter families of finite-dimensional states.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimation;
pub mod expfam;
pub mod families;
pub mod linalg;
pub mod measurement;
pub mod qmetrics;
pub mod repdecomp;
pub mod stats;

pub use error::{Error, Result};
