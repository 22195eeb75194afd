//! Semi-supervised least-squares kernel SVM, with a dense density-matrix
//! simulation of its quantum training pipeline.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod cost;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod graph;
pub mod hhl;
pub mod linalg;
pub mod lmr;
pub mod pipeline;
pub mod report;
pub mod sample;
pub mod svm;

pub use error::{Error, Result};
