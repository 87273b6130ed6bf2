//! Road networks, their line graphs, adjacency normalization and speed
//! histograms.

mod histogram;
pub mod io;
mod line_graph;
mod network;
mod normalize;

pub use histogram::{bucketize, SpeedHistogram, DEFAULT_BUCKETS, DEFAULT_BUCKET_WIDTH};
pub use line_graph::{FeatureColumn, FeatureKind, LineGraph};
pub use network::{build_line_graph, RoadNetwork, Segment};
pub use normalize::{normalize_adjacency, NormalizedAdjacency};
