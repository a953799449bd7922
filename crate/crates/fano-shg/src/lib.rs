pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod explore;
pub mod integrator;
pub mod model;
pub mod validate;

pub use error::{Error, Result};
