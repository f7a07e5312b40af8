pub mod cli;
pub mod corpus;
pub mod error;
pub mod network;
mod numeric;
pub mod prox;
pub mod pruning;
pub mod synthetic;
mod textio;
pub mod trainer;

pub use error::{Error, Result};
