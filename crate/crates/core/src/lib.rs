pub mod error;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod solver;
pub mod weights;
pub mod sampler;
pub mod diagnostics;
pub mod sim;
pub mod io;
pub mod cli;

pub use error::{Error, Result};
