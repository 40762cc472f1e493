//! Tripartite post/word/category graph attention for personality detection.

pub mod cli;
pub mod cost;
pub mod error;
pub mod fixtures;
pub mod flow_gat;
pub mod graph;
pub mod liwc;
pub mod model;
pub mod nn;
pub mod text;

pub use error::{Error, Result};
