//! Scalable Bayesian optimization: sparse Gaussian-process surrogates,
//! Gaussian random embeddings for high-dimensional search, and an
//! asynchronous worker pool with posterior-mean hallucination.

pub mod acquisition;
pub mod benchmarks;
pub mod bounds;
pub mod campaign;
pub mod dataset;
pub mod design;
pub mod embedding;
pub mod error;
pub mod gp_exact;
pub mod gp_sparse;
pub mod kernels;
mod linalg;
pub mod optim;
pub mod config;
pub mod report;
pub mod rng;
pub mod scheduler;
pub mod stress;
pub mod surrogate;
pub mod train;

pub use bounds::BoxBounds;
pub use dataset::{Dataset, OptMode};
pub use error::{Error, Result};
pub use gp_exact::ExactGpModel;
pub use gp_sparse::{InducingSet, SparseGpModel, SparseVariant};
pub use kernels::{KernelFamily, KernelSpec};
pub use surrogate::Surrogate;
