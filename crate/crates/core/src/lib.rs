pub mod diffop;
pub mod error;
pub mod group;
pub mod jets;
pub mod poly;
pub mod sampler;
pub mod verifiers;

pub use error::{Error, Result};
