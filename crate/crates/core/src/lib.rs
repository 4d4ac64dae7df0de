//! Word embeddings trained jointly on corpus n-grams and WordNet, coupled
//! with ADMM.

pub mod admm;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graphdist;
pub mod kb;
pub mod nlm;
pub mod rng;
pub mod sgd;
pub mod synthetic;
pub mod wordnet;

pub use error::{Error, Result};
