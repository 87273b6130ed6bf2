//! Multilevel k-way partitioning of line graphs into dense clusters, and
//! stochastic grouping of clusters into training batches.
//!
//! The scheme follows the usual multilevel recipe: heavy-edge matching
//! shrinks the graph until it has at most `max(4s, 200)` vertices, seeded
//! region growing splits the coarsest graph, and the partition is projected
//! back level by level with balance repair and boundary refinement at each
//! step. Direction is ignored: the partitioner works on the symmetrized
//! graph and the edge cut counts unordered adjacent pairs.

mod batch;
mod initial;
pub mod io;
mod refine;
mod wgraph;

use serde::{Deserialize, Serialize};

pub use batch::{form_batches, Batch};

use crate::error::{Error, Result};
use crate::graph::LineGraph;
use crate::seed::Seed;
use wgraph::WGraph;

/// METIS-style load factor: no cluster may exceed `imbalance · N / s`.
pub const DEFAULT_IMBALANCE: f64 = 1.03;

/// Node-to-cluster assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSet {
    assignment: Vec<usize>,
    clusters: Vec<Vec<usize>>,
}

impl PartitionSet {
    pub fn from_assignment(assignment: Vec<usize>, cluster_count: usize) -> Result<Self> {
        let mut clusters = vec![Vec::new(); cluster_count];
        for (v, &c) in assignment.iter().enumerate() {
            if c >= cluster_count {
                return Err(Error::Argument(format!(
                    "node {v} assigned to cluster {c}, but only {cluster_count} clusters exist"
                )));
            }
            clusters[c].push(v);
        }
        Ok(PartitionSet {
            assignment,
            clusters,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Node lists per cluster, each ascending.
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Largest cluster size the balance constraint allows.
    pub fn size_limit(node_count: usize, cluster_count: usize, imbalance: f64) -> usize {
        let avg = node_count as f64 / cluster_count as f64;
        // Tolerate rounding noise such as 1.03 * 100 = 103.00000000000001.
        ((imbalance * avg) - 1e-9).ceil().max(avg.ceil()) as usize
    }
}

/// Number of unordered adjacent node pairs split across clusters.
pub fn edge_cut(g: &LineGraph, p: &PartitionSet) -> usize {
    g.undirected_edges()
        .into_iter()
        .filter(|&(a, b)| p.assignment[a] != p.assignment[b])
        .count()
}

/// Partitions `g` into `s` non-empty clusters, minimizing the edge cut under
/// the balance constraint `size ≤ ⌈imbalance · N / s⌉`.
pub fn partition(g: &LineGraph, s: usize, imbalance: f64, seed: Seed) -> Result<PartitionSet> {
    let n = g.node_count();
    if s == 0 || s > n {
        return Err(Error::Argument(format!(
            "cluster count {s} must lie in 1..={n}"
        )));
    }
    if !(imbalance >= 1.0 && imbalance.is_finite()) {
        return Err(Error::Argument(format!("imbalance {imbalance} must be at least 1")));
    }
    if s == 1 {
        return PartitionSet::from_assignment(vec![0; n], 1);
    }
    if s == n {
        return PartitionSet::from_assignment((0..n).collect(), n);
    }

    let mut rng = seed.rng();
    let max_size = PartitionSet::size_limit(n, s, imbalance) as i64;
    let coarsen_to = (4 * s).max(200);
    let max_vwgt = ((n + 2 * s - 1) / (2 * s)).max(1) as i64;

    let mut levels: Vec<(WGraph, Vec<usize>)> = Vec::new();
    let mut current = WGraph::from_line_graph(g);
    while current.len() > coarsen_to {
        let (coarse, cmap) = current.coarsen(&mut rng, max_vwgt);
        // Stop once matching stalls.
        if coarse.len() as f64 > 0.95 * current.len() as f64 {
            break;
        }
        levels.push((current, cmap));
        current = coarse;
    }

    let mut part = initial::grow_regions(&current, s, &mut rng);
    refine::balance(&current, &mut part, s, max_size);
    refine::refine(&current, &mut part, s, max_size);

    while let Some((fine, cmap)) = levels.pop() {
        part = cmap.iter().map(|&cv| part[cv]).collect();
        refine::balance(&fine, &mut part, s, max_size);
        refine::refine(&fine, &mut part, s, max_size);
        current = fine;
    }
    debug_assert_eq!(current.len(), n);

    PartitionSet::from_assignment(part, s)
}

/// Runs boundary refinement on an existing assignment; the edge cut never
/// increases. Returns the new cut.
pub fn refine(g: &LineGraph, p: &mut PartitionSet, imbalance: f64) -> usize {
    let w = WGraph::from_line_graph(g);
    let s = p.cluster_count();
    let limit = PartitionSet::size_limit(g.node_count(), s, imbalance);
    // Clusters already above the limit may shrink but not grow.
    let max_size = p.sizes().into_iter().max().unwrap_or(0).max(limit);
    let mut part = p.assignment.clone();
    refine::refine(&w, &mut part, s, max_size as i64);
    *p = PartitionSet::from_assignment(part, s).expect("refinement keeps cluster ids");
    edge_cut(g, p)
}
