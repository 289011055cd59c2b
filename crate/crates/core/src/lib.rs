//! Multi-task multimodal sentiment regression.
//!
//! Sentiment scores in [−3, +3] are predicted as the main task, with polarity
//! (sign) and intensity (binned magnitude) classification as optional
//! auxiliary tasks. Three unimodal networks (vocal, visual, verbal) and four
//! fusion networks (early, tensor, late, hierarchical) are built on a small
//! reverse-mode autodiff engine and trained with Adam.

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod container;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod labels;
pub mod layers;
pub mod models;
pub mod training;

pub use error::{Error, Result};
