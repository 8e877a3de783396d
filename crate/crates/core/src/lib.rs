//! Noise-robust data pruning.
//!
//! Given embeddings and per-example confidences for a noisily labeled
//! training set, pick a size-budgeted subset that maximizes how much
//! confident, similar evidence every example has among the selected ones.
//! The objective is monotone and submodular, so greedy selection is within
//! `1 - 1/e` of the optimum; [`verify`] checks that and related properties
//! on small instances.
//!
//! The pipeline is [`dataset`] (ingestion and confidences) ->
//! [`similarity`] (thresholded cosine graph) -> [`objective`] ->
//! [`selectors`].

pub mod dataset;
pub mod error;
pub mod objective;
pub mod selectors;
pub mod similarity;
pub mod verify;

pub use dataset::{AuxScoreKind, AuxScores, ConfidenceMetric, ConfidenceVector, Dataset, Matrix, MatrixFormat};
pub use error::{Error, ErrorKind, Result};
pub use objective::{GainMode, SelectionState, Utility};
pub use selectors::{Budget, Method, PruneReport, SelectorConfig};
pub use similarity::{build_graph, GraphBuilder, NeighborGraph};
