pub mod bounds;
pub mod data;
pub mod error;
pub mod experiment;
pub mod hankel;
mod linalg;
pub mod pce;
pub mod predictor;
pub mod residual;
pub mod synth;
pub mod verify;
pub mod wasserstein;

pub use error::{Error, Result};
