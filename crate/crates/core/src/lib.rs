//! Prospective performance prediction from ocular and cardiac signals.

pub mod cardiac;
pub mod error;
pub mod fusion;
pub mod learners;
pub mod model;
pub mod pipeline;
pub mod ocular;
pub mod preprocess;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
