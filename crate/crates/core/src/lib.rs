//! Point-group equivariant message passing for bounded physical dynamics.

pub mod error;
pub mod model;
pub mod nn;
pub mod pointgroup;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
