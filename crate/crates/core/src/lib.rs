//! Subgraph classification through permutation-invariant adjacency-matrix
//! images.
//!
//! A subgraph sampled from a parent network is turned into a binary image by
//! ordering its vertices canonically and drawing its adjacency matrix in that
//! order. The images feed supervised learners or a label-vector nearest
//! neighbor transfer pipeline; classical topological features and
//! Weisfeiler-Lehman histograms serve as baselines.

pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod learn;
pub mod manifest;
pub mod ordering;
pub mod rng;
pub mod sampler;
pub mod transfer;

pub use error::{Error, Result};
pub use graph::{Family, Graph};
pub use ordering::{Ordering, StructuredImage};
