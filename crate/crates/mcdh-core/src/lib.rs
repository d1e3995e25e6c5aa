pub mod error;
pub mod kernels;
pub mod choice;
pub mod linalg;
pub mod model;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar type for estimation, simulation, and I/O.
pub type Real = f64;
pub mod stats;
pub mod transforms;
