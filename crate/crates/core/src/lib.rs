//! Link prediction with adaptive pairwise encodings.
//!
//! The pipeline: precompute sparse personalized PageRank rows, select a
//! PPR-thresholded context of nodes per target link, encode nodes with a GCN,
//! attend from each link to its context with PPR-derived relative positional
//! encodings, and score the link from node, pairwise and count features.
//! Classical heuristics and ranking metrics share the same evaluation path.

pub mod autodiff;
pub mod config;
pub mod context;
pub mod error;
pub mod eval;
pub mod factors;
pub mod graph;
pub mod heuristics;
pub mod model;
pub mod ppr;
pub mod train;

pub use error::{Error, Result};
