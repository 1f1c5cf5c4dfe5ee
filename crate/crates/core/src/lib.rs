pub mod cli;
pub mod comparison;
pub mod error;
pub mod estimation;
pub mod model;
pub mod numerics;
pub mod policy;
pub mod ranking;
pub mod welfare;

pub use error::{Error, Result};
