//! Gradient-based taint inference.
//!
//! This crate learns a differentiable surrogate of a program's input-to-sink
//! behavior and reads information flow out of the surrogate's input
//! gradients, then compares that against a classic rule-based dynamic taint
//! analysis on the same programs.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod floweval;
pub mod fuzz;
pub mod ir;
pub mod nn;
pub mod recipe;
pub mod ruledta;
pub mod saliency;
pub mod score;
pub mod targets;

pub use error::{Error, Result};
