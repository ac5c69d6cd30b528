//! Information gain, coherence and coherent information in a pointer-style
//! quantum measurement with a mixed apparatus.

pub mod cli;
pub mod entanglement;
pub mod error;
pub mod linalg;
pub mod measurement;
mod optim;
pub mod quantities;
pub mod seeds;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
