//! Decompose regression residuals into per-training-instance Shapley
//! contributions, and analyse the resulting matrices.

pub mod analysis;
pub mod cli;
pub mod dataio;
pub mod engine;
pub mod error;
pub mod influence;
pub mod kernel;
pub mod models;
pub mod phi;
pub mod plot;
pub mod rng;

pub use error::{Error, Result};
