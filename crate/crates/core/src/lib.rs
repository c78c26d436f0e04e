//! Multiple kernel partial order embedding.
//!
//! Learn a single Euclidean similarity space from several kernel views of a
//! dataset and a (possibly noisy) set of relative comparisons
//! `d(i, j) < d(k, l)`:
//!
//! * [`graph`] turns comparisons into a pair graph and filters it down to a
//!   consistent, redundancy-free partial order.
//! * [`kernel`] builds and validates kernel matrices.
//! * [`solver`] learns one PSD (or diagonal) metric per kernel by projected
//!   subgradient descent.
//! * [`embedding`] factorises learned metrics into projections and maps
//!   training and unseen items into the joint space.
//! * [`oracle`] constructs an exact embedding for any acyclic comparison set.
//! * [`eval`] scores embeddings and runs held-out and cross-validated experiments.
//! * [`synth`] generates taxonomy-structured synthetic datasets.
//! * [`cli`] backs the `mkpoe` binary.

pub mod cli;
pub mod comparison;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod kernel;
pub mod linalg;
pub mod oracle;
pub mod solver;
pub mod synth;

pub use comparison::{Comparison, Pair};
pub use embedding::EmbeddingModel;
pub use error::{Error, Result};
pub use graph::PairGraph;
pub use kernel::{FeatureTable, KernelMatrix};
pub use solver::{Hyperparams, MetricSet, Mode, TraceLog};
