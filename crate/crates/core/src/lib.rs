pub mod baseline;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod io;
pub mod nn;
pub mod ppo;
pub mod sim;

pub use error::{Error, Result};
