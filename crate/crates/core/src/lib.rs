pub mod datakit;
pub mod detector;
pub mod error;
pub mod evalkit;
pub mod geometry;
pub mod imagery;
pub mod nn;
pub mod parallel;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
