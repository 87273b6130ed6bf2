use super::LineGraph;
use crate::sparse::CsrMatrix;

/// `D̂^(-1/2) (A + I) D̂^(-1/2)`, the propagation matrix of a graph
/// convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.matrix
    }
}

/// Adds self-loops and applies symmetric degree normalization.
///
/// With `symmetrize`, `A` is first replaced by `max(A, Aᵀ)`, which is the
/// form the GCN layers use. Without it, `D̂` holds the row sums (out-degree
/// plus one) of the directed `A + I`.
pub fn normalize_adjacency(g: &LineGraph, symmetrize: bool) -> NormalizedAdjacency {
    let n = g.node_count();
    let mut entries: Vec<(usize, usize)> = Vec::with_capacity(2 * g.edges().len() + n);
    for &(a, b) in g.edges() {
        if a == b {
            continue;
        }
        entries.push((a, b));
        if symmetrize {
            entries.push((b, a));
        }
    }
    entries.extend((0..n).map(|i| (i, i)));
    entries.sort_unstable();
    entries.dedup();

    let mut degree = vec![0.0f64; n];
    for &(a, _) in &entries {
        degree[a] += 1.0;
    }
    let matrix = CsrMatrix::from_triplets(
        n,
        n,
        entries
            .into_iter()
            .map(|(a, b)| (a, b, 1.0 / (degree[a] * degree[b]).sqrt())),
    )
    .expect("indices come from the graph");
    NormalizedAdjacency { matrix }
}
