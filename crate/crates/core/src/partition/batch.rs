use rand::seq::SliceRandom;

use super::PartitionSet;
use crate::error::{Error, Result};
use crate::graph::LineGraph;
use crate::seed::Seed;

/// A union of clusters with every original edge among its nodes restored.
#[derive(Debug, Clone)]
pub struct Batch {
    pub index: usize,
    /// Cluster ids combined into this batch.
    pub clusters: Vec<usize>,
    /// Global node indices, ascending. Local node `k` of `graph` is
    /// `nodes[k]`.
    pub nodes: Vec<usize>,
    pub graph: LineGraph,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Shuffles the clusters with `seed` and groups them into `num_batches`
/// batches of `q = s / num_batches` clusters. When `s` is not a multiple of
/// `num_batches` the first `s mod num_batches` batches take one extra
/// cluster. Each batch graph is the subgraph of `g` induced on its nodes, so
/// edges between clusters of the same batch are re-added.
pub fn form_batches(
    g: &LineGraph,
    p: &PartitionSet,
    num_batches: usize,
    seed: Seed,
) -> Result<Vec<Batch>> {
    let s = p.cluster_count();
    if num_batches == 0 || num_batches > s {
        return Err(Error::Argument(format!(
            "batch count {num_batches} must lie in 1..={s}"
        )));
    }
    if p.assignment().len() != g.node_count() {
        return Err(Error::Argument(format!(
            "partition covers {} nodes, graph has {}",
            p.assignment().len(),
            g.node_count()
        )));
    }
    let mut order: Vec<usize> = (0..s).collect();
    order.shuffle(&mut seed.rng());

    let q = s / num_batches;
    let extra = s % num_batches;
    let mut batches = Vec::with_capacity(num_batches);
    let mut cursor = 0;
    for index in 0..num_batches {
        let take = q + usize::from(index < extra);
        let mut clusters = order[cursor..cursor + take].to_vec();
        cursor += take;
        clusters.sort_unstable();
        let mut nodes: Vec<usize> = clusters
            .iter()
            .flat_map(|&c| p.clusters()[c].iter().copied())
            .collect();
        nodes.sort_unstable();
        let graph = g.induced(&nodes)?;
        batches.push(Batch {
            index,
            clusters,
            nodes,
            graph,
        });
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{partition, DEFAULT_IMBALANCE};
    use ndarray::Array2;
    use rand::Rng;

    fn random_graph(n: usize, m: usize, seed: u64) -> LineGraph {
        let mut rng = Seed(seed).rng();
        let edges = (0..m)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect();
        LineGraph::new((0..n as u64).collect(), edges, vec![], Array2::zeros((n, 0))).unwrap()
    }

    #[test]
    fn single_batch_reproduces_graph() {
        let g = random_graph(120, 400, 3);
        let p = partition(&g, 6, DEFAULT_IMBALANCE, Seed(1)).unwrap();
        let batches = form_batches(&g, &p, 1, Seed(2)).unwrap();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].graph.adjacency(), g.adjacency());
        assert_eq!(batches[0].graph.node_ids(), g.node_ids());
    }

    #[test]
    fn one_cluster_per_batch() {
        let g = random_graph(60, 150, 4);
        let p = partition(&g, 5, DEFAULT_IMBALANCE, Seed(1)).unwrap();
        let batches = form_batches(&g, &p, 5, Seed(2)).unwrap();
        for b in &batches {
            assert_eq!(b.clusters.len(), 1);
            assert_eq!(b.nodes, p.clusters()[b.clusters[0]]);
        }
    }

    #[test]
    fn paired_clusters_match_brute_force_induced_subgraph() {
        let g = random_graph(80, 300, 5);
        let p = partition(&g, 4, DEFAULT_IMBALANCE, Seed(1)).unwrap();
        let batches = form_batches(&g, &p, 2, Seed(7)).unwrap();
        let mut covered = vec![0; g.node_count()];
        for b in &batches {
            assert_eq!(b.clusters.len(), 2);
            for &v in &b.nodes {
                covered[v] += 1;
            }
            // Brute force: every original edge with both ends in the batch.
            let inside = |v: usize| b.clusters.contains(&p.assignment()[v]);
            let mut expected: Vec<(u64, u64)> = g
                .edges()
                .iter()
                .filter(|&&(a, c)| inside(a) && inside(c))
                .map(|&(a, c)| (g.node_ids()[a], g.node_ids()[c]))
                .collect();
            expected.sort_unstable();
            let mut got: Vec<(u64, u64)> = b
                .graph
                .edges()
                .iter()
                .map(|&(a, c)| (b.graph.node_ids()[a], b.graph.node_ids()[c]))
                .collect();
            got.sort_unstable();
            assert_eq!(got, expected);
        }
        assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn too_many_batches_rejected() {
        let g = random_graph(10, 20, 1);
        let p = partition(&g, 2, DEFAULT_IMBALANCE, Seed(1)).unwrap();
        assert!(matches!(form_batches(&g, &p, 3, Seed(0)), Err(Error::Argument(_))));
    }

    #[test]
    fn uneven_grouping() {
        let g = random_graph(50, 100, 1);
        let p = partition(&g, 5, DEFAULT_IMBALANCE, Seed(1)).unwrap();
        let batches = form_batches(&g, &p, 2, Seed(0)).unwrap();
        let counts: Vec<usize> = batches.iter().map(|b| b.clusters.len()).collect();
        assert_eq!(counts, vec![3, 2]);
    }
}
