//! Braid-based quasimorphisms of area-preserving flows on the two-sphere.

pub mod acceptance;
pub mod braids;
pub mod cli;
pub mod config;
pub mod conventions;
pub mod error;
pub mod flows;
pub mod forms;
pub mod gg;
pub mod invariants;
pub mod manifest;
pub mod mc;
pub mod quad;
pub mod sphere;

pub use error::{Error, Result};
