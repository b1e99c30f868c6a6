//! Certification of full network nonlocality in the three-branch star and the bilocal line.

pub mod analysis;
pub mod dist;
pub mod inflation;
pub mod error;
pub mod lpsolve;
pub mod qsim;
pub mod stats;
pub mod witness;

pub use error::{Error, Result};
