pub mod amr;
pub mod bench;
pub mod config;
pub mod dpo;
pub mod error;
pub mod evaluator;
pub mod gateway;
pub mod model;

pub use error::{Error, Result};
pub mod prompts;
pub mod judge;
pub mod resolver;
pub mod retrieval;
pub mod text;
