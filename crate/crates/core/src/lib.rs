pub mod agents;
pub mod cli;
pub mod dataset;
pub mod embed;
pub mod env;
pub mod error;
pub mod eval;
pub mod kg;
pub mod numfmt;
pub mod reward;
pub mod seed;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
