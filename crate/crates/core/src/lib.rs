//! Modular truss-frame cantilever design as a masked Markov decision
//! process: an integer-grid state model, an embedded 2D frame finite
//! element solver, a PPO-trained convolutional actor-critic that places
//! frames, a randomized baseline generator, and the comparison metrics
//! used to benchmark the two.

pub mod baseline;
pub mod env;
pub mod error;
pub mod fea;
pub mod grid;
pub mod par;
pub mod scenario;
pub mod structure;

pub use error::{Error, Result};
