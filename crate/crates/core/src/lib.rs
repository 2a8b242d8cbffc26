//! Intrusion-detection experiment pipeline for labeled IoT network flows.

pub mod flow;
pub mod matrix;
pub mod rng;

pub use matrix::Matrix;
pub mod features;
pub mod model;
pub mod split;
pub mod trees;
pub mod knn;
pub mod svm;
pub mod neural;
pub mod eval;
pub mod pipeline;
