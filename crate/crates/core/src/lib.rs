//! Multimodal soft-prompt tuning of frozen transformer stacks for time-series
//! forecasting, at a scale that runs on a laptop.
//!
//! A forecast runs three frozen transformer stacks: a vision encoder over a
//! rendered line chart of the context window, a text encoder over a dataset
//! description, and a time-series stack over patch embeddings. Only the
//! per-layer soft prompts, the two linear interaction layers that map encoder
//! outputs into the time-series width, and the forecast head are trained.

pub mod autodiff;
pub mod config;
pub mod data;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod render;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod transformer;

pub use error::{Error, Result};
