//! Verb-conditioned object retrieval.
//!
//! A recurrent language encoder maps commands such as "hand me something
//! to cut" into a frozen image-feature space; candidates are ranked by cosine
//! similarity to the command embedding. The crate covers mining verb/object
//! pairs from dependency parses, building class-disjoint training data,
//! training the encoder with hand-written backpropagation, and the
//! five-candidate retrieval evaluation.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod miner;
pub mod model;
pub mod trainer;
mod rng;

pub use error::{Error, Result};
pub use rng::{stream, Rng};
