//! Quadratic GCN (QGCN) graph classification.
//!
//! GCN layers with a self-regularized symmetric sigmoid feed a bilinear
//! readout `V₁ᵀ Fᵀ Ã X_K V₂`, giving a class-score vector whose size does not
//! depend on the number of vertices. Around the model sit topological vertex
//! features, a small reverse-mode tape, the training protocol (Adam, repeats,
//! best-validation selection) and dataset/checkpoint I/O.

pub mod batch;
pub mod config;
pub mod error;
pub mod features;
pub mod gradcheck;
pub mod graph;
pub mod io;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
