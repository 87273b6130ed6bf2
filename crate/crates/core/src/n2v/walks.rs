use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LineGraph;
use crate::seed::Seed;

/// Directed graph with positive edge weights; neighbor lists sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    out: Vec<Vec<(usize, f64)>>,
}

impl WeightedDigraph {
    /// Sums duplicate edges; drops non-positive weights.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Argument(format!("edge ({a}, {b}) outside {n} nodes")));
            }
            if w > 0.0 {
                out[a].push((b, w));
            }
        }
        for list in &mut out {
            list.sort_by_key(|e| e.0);
            list.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        Ok(WeightedDigraph { out })
    }

    /// Unit-weight copy of the line graph's edges.
    pub fn from_line_graph(g: &LineGraph) -> Self {
        let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.node_count()];
        for &(a, b) in g.edges() {
            out[a].push((b, 1.0));
        }
        WeightedDigraph { out }
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn out_edges(&self, v: usize) -> &[(usize, f64)] {
        &self.out[v]
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.out[a]
            .binary_search_by_key(&b, |e| e.0)
            .ok()
            .map(|k| self.out[a][k].1)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.weight(a, b).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walk_length: usize,
    pub walks_per_node: usize,
    /// Return parameter: weight of stepping back to the previous node is
    /// divided by `p`.
    pub p: f64,
    /// In-out parameter: weight of moving away from the previous node is
    /// divided by `q`.
    pub q: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walk_length: 80,
            walks_per_node: 10,
            p: 1.0,
            q: 1.0,
        }
    }
}

/// Token sequences; token meaning depends on the producer (node index or
/// feature-value index).
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub sequences: Vec<Vec<usize>>,
    pub walk_length: usize,
    pub walks_per_node: usize,
}

/// Second-order biased walks. From `prev → cur`, candidate `x` of `cur` has
/// weight `w/p` if `x == prev`, `w` if `x → prev` is an edge, `w/q`
/// otherwise. The first step is weighted by edge weight alone. Walks stop
/// early at nodes without out-edges. Rounds are ordered outermost; within a
/// round walks start at every node in index order. Walk `(round, v)` draws
/// from `seed.child(round).child(v)`.
pub fn random_walks(g: &WeightedDigraph, config: &WalkConfig, seed: Seed) -> Result<WalkCorpus> {
    if g.node_count() == 0 {
        return Err(Error::Argument("cannot walk an empty graph".into()));
    }
    if config.walk_length == 0 {
        return Err(Error::Argument("walk length must be at least 1".into()));
    }
    if !(config.p > 0.0 && config.q > 0.0) {
        return Err(Error::Argument(format!(
            "p = {} and q = {} must be positive",
            config.p, config.q
        )));
    }
    let mut sequences = Vec::with_capacity(g.node_count() * config.walks_per_node);
    for round in 0..config.walks_per_node {
        let round_seed = seed.child(round as u64);
        let walks: Vec<Vec<usize>> = (0..g.node_count())
            .into_par_iter()
            .map(|v| walk(g, v, config, &mut round_seed.child(v as u64).rng()))
            .collect();
        sequences.extend(walks);
    }
    Ok(WalkCorpus {
        sequences,
        walk_length: config.walk_length,
        walks_per_node: config.walks_per_node,
    })
}

fn walk<R: Rng>(g: &WeightedDigraph, start: usize, config: &WalkConfig, rng: &mut R) -> Vec<usize> {
    let mut path = Vec::with_capacity(config.walk_length);
    path.push(start);
    let mut weights: Vec<f64> = Vec::new();
    while path.len() < config.walk_length {
        let cur = *path.last().expect("walk is non-empty");
        let edges = g.out_edges(cur);
        if edges.is_empty() {
            break;
        }
        weights.clear();
        match path.len().checked_sub(2).map(|k| path[k]) {
            None => weights.extend(edges.iter().map(|e| e.1)),
            Some(prev) => weights.extend(edges.iter().map(|&(x, w)| {
                if x == prev {
                    w / config.p
                } else if g.has_edge(x, prev) {
                    w
                } else {
                    w / config.q
                }
            })),
        }
        let total: f64 = weights.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut choice = edges.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if target < *w {
                choice = k;
                break;
            }
            target -= w;
        }
        path.push(edges[choice].0);
    }
    path
}
