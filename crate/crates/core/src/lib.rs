//! Travel-speed histogram prediction for road segments.
//!
//! A road network is turned into its line graph, partitioned into dense
//! clusters, and one adversarially regularized graph convolutional model is
//! trained per batch of clusters. Random-walk embeddings and two naive
//! predictors serve as baselines.

pub mod argcn;
pub mod datagen;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod n2v;
pub mod nn;
pub mod partition;
pub mod seed;
pub mod sparse;

pub use error::{Error, Result};
pub use seed::Seed;
