//! Learnable string edit distance.
//!
//! Every edit operation probability is produced by a neural network that looks at
//! contextual representations of both strings. The same dynamic program serves
//! string-pair classification (is this pair a match?) and string transduction
//! (generate a target string from a source string).

pub mod checkpoint;
pub mod data;
pub mod dp;
pub mod error;
pub mod matching;
pub mod model;
pub mod nn;
pub mod stat;
pub mod training;
pub mod transduction;

pub use error::{Error, Result};
