pub mod error;
pub mod geometry;
pub mod numerics;
pub mod bem;
pub mod flow;
pub mod initial_data;
pub mod pressure;
pub mod diagnostics;
pub mod report;

pub use error::{Error, Result};
pub mod runner;
pub mod validation;
