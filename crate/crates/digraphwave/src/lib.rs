//! Digraphwave: structural node embeddings for directed, optionally weighted graphs.
//!
//! The pipeline computes columns of the heat kernel `Ψ(τ) = exp(-τ𝓛)` of the
//! out-degree normalized Laplacian in batches using a truncated Taylor series,
//! thresholds the resulting reachability values per source node, and compresses
//! each column into a fixed-size vector by sampling the empirical characteristic
//! function. Transposition and aggregation enhancements extend the core
//! embeddings with in-neighbourhood and neighbour-mean information.
//!
//! The crate also ships the closed-form diffusion theory used to pick
//! timescales (regularized incomplete gamma bounds, source-star graphs),
//! synthetic benchmark generators and a network-alignment evaluator.

pub mod align;
pub mod embed;
pub mod error;
pub mod graph;
pub mod matexp;
pub mod output;
pub mod pipeline;
pub mod synth;
pub mod theory;

pub use ndarray;

pub use embed::{DigraphwaveConfig, EmbeddingMatrix};
pub use error::{DgwError, Result};
pub use graph::{DegreeVectors, DiffusionOperator, Graph, Orientation};
pub use matexp::{ErrorModel, Precision, ReachabilityBatch, TaylorCoefficients};
pub use pipeline::{digraphwave, digraphwave_core};
pub use theory::SourceStarSpec;
