use std::collections::HashMap;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Discrete codes; one-hot encoded.
    Categorical,
    /// Real values; min–max scaled to `[0, 1]`.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureColumn {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        FeatureColumn {
            name: name.into(),
            kind,
        }
    }
}

/// How one raw column maps onto columns of the encoded feature matrix.
#[derive(Debug, Clone, PartialEq)]
enum ColumnEncoding {
    OneHot { values: Vec<f64> },
    MinMax { min: f64, max: f64 },
}

/// Line graph of a road network: nodes are segments, directed edges are
/// permissible segment-to-segment transitions.
///
/// Holds both the raw per-segment feature values and the encoded feature
/// matrix `X` used by the models. Induced subgraphs keep the parent's
/// encoding so one-hot widths agree across batches.
#[derive(Debug, Clone)]
pub struct LineGraph {
    node_ids: Vec<u64>,
    edges: Vec<(usize, usize)>,
    out_offsets: Vec<usize>,
    schema: Vec<FeatureColumn>,
    raw: Array2<f64>,
    features: Array2<f64>,
}

impl LineGraph {
    /// Builds a graph from node ids, directed edges and raw feature values,
    /// encoding the features according to `schema`.
    pub fn new(
        node_ids: Vec<u64>,
        edges: Vec<(usize, usize)>,
        schema: Vec<FeatureColumn>,
        raw: Array2<f64>,
    ) -> Result<Self> {
        if raw.nrows() != node_ids.len() {
            return Err(Error::Structural(format!(
                "{} feature rows for {} nodes",
                raw.nrows(),
                node_ids.len()
            )));
        }
        if raw.ncols() != schema.len() {
            return Err(Error::Structural(format!(
                "{} feature columns for a {}-column schema",
                raw.ncols(),
                schema.len()
            )));
        }
        let encodings = fit_encodings(&schema, &raw);
        let features = apply_encodings(&encodings, &raw);
        Self::assemble(node_ids, edges, schema, raw, features)
    }

    fn assemble(
        node_ids: Vec<u64>,
        mut edges: Vec<(usize, usize)>,
        schema: Vec<FeatureColumn>,
        raw: Array2<f64>,
        features: Array2<f64>,
    ) -> Result<Self> {
        let n = node_ids.len();
        if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n) {
            return Err(Error::Structural(format!(
                "edge ({a}, {b}) references a node outside 0..{n}"
            )));
        }
        edges.sort_unstable();
        edges.dedup();
        let mut out_offsets = vec![0usize; n + 1];
        for &(a, _) in &edges {
            out_offsets[a + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
        }
        Ok(LineGraph {
            node_ids,
            edges,
            out_offsets,
            schema,
            raw,
            features,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    /// Sorted, de-duplicated directed edges.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_neighbors(&self, i: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.edges[self.out_offsets[i]..self.out_offsets[i + 1]]
            .iter()
            .map(|&(_, j)| j)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges[self.out_offsets[i]..self.out_offsets[i + 1]]
            .binary_search(&(i, j))
            .is_ok()
    }

    /// Unordered adjacent pairs `(a, b)` with `a < b`, ignoring direction.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Directed 0/1 adjacency matrix `A`.
    pub fn adjacency(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(
            self.node_count(),
            self.node_count(),
            self.edges.iter().map(|&(a, b)| (a, b, 1.0)),
        )
        .expect("edges validated at construction")
    }

    pub fn schema(&self) -> &[FeatureColumn] {
        &self.schema
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    /// Raw feature values, `N × schema.len()`.
    pub fn raw_features(&self) -> &Array2<f64> {
        &self.raw
    }

    /// Encoded feature matrix `X`, `N × F`.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn index_of(&self) -> HashMap<u64, usize> {
        self.node_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect()
    }

    /// Subgraph induced on `nodes` (global indices, in the order given).
    /// Every original edge between two retained nodes is kept.
    pub fn induced(&self, nodes: &[usize]) -> Result<LineGraph> {
        let mut local = HashMap::with_capacity(nodes.len());
        for (k, &v) in nodes.iter().enumerate() {
            if v >= self.node_count() {
                return Err(Error::Argument(format!("node {v} outside graph")));
            }
            if local.insert(v, k).is_some() {
                return Err(Error::Argument(format!("node {v} listed twice")));
            }
        }
        let mut edges = Vec::new();
        for &v in nodes {
            for w in self.out_neighbors(v) {
                if let Some(&lw) = local.get(&w) {
                    edges.push((local[&v], lw));
                }
            }
        }
        let node_ids = nodes.iter().map(|&v| self.node_ids[v]).collect();
        let raw = self.raw.select(Axis(0), nodes);
        let features = self.features.select(Axis(0), nodes);
        Self::assemble(node_ids, edges, self.schema.clone(), raw, features)
    }
}

fn fit_encodings(schema: &[FeatureColumn], raw: &Array2<f64>) -> Vec<ColumnEncoding> {
    schema
        .iter()
        .zip(raw.columns())
        .map(|(col, values)| match col.kind {
            FeatureKind::Categorical => {
                let mut distinct: Vec<f64> = values.to_vec();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                ColumnEncoding::OneHot { values: distinct }
            }
            FeatureKind::Continuous => {
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                ColumnEncoding::MinMax { min, max }
            }
        })
        .collect()
}

fn apply_encodings(encodings: &[ColumnEncoding], raw: &Array2<f64>) -> Array2<f64> {
    let width: usize = encodings
        .iter()
        .map(|e| match e {
            ColumnEncoding::OneHot { values } => values.len(),
            ColumnEncoding::MinMax { .. } => 1,
        })
        .sum();
    let mut out = Array2::zeros((raw.nrows(), width));
    let mut offset = 0;
    for (c, enc) in encodings.iter().enumerate() {
        match enc {
            ColumnEncoding::OneHot { values } => {
                for (r, &v) in raw.column(c).iter().enumerate() {
                    let k = values
                        .binary_search_by(|probe| probe.total_cmp(&v))
                        .expect("fitted on the same column");
                    out[[r, offset + k]] = 1.0;
                }
                offset += values.len();
            }
            ColumnEncoding::MinMax { min, max } => {
                let span = max - min;
                for (r, &v) in raw.column(c).iter().enumerate() {
                    out[[r, offset]] = if span > 0.0 { (v - min) / span } else { 0.0 };
                }
                offset += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> LineGraph {
        let schema = vec![
            FeatureColumn::new("speed_limit", FeatureKind::Categorical),
            FeatureColumn::new("length", FeatureKind::Continuous),
        ];
        let raw = array![[50.0, 100.0], [80.0, 300.0], [50.0, 200.0]];
        LineGraph::new(vec![10, 11, 12], vec![(0, 1), (1, 2), (2, 0), (0, 1)], schema, raw).unwrap()
    }

    #[test]
    fn encodes_one_hot_and_min_max() {
        let g = toy();
        assert_eq!(
            g.features(),
            &array![[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 0.5]]
        );
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 0)]);
        assert!(g.has_edge(2, 0));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn induced_keeps_parent_encoding() {
        let g = toy();
        let sub = g.induced(&[2, 0]).unwrap();
        assert_eq!(sub.node_ids(), &[12, 10]);
        assert_eq!(sub.edges(), &[(0, 1)]);
        assert_eq!(sub.features().row(0), g.features().row(2));
        assert_eq!(sub.feature_dim(), 3);
        assert!(g.induced(&[0, 0]).is_err());
    }

    #[test]
    fn mismatched_rows_rejected() {
        let err = LineGraph::new(vec![1, 2], vec![], vec![], Array2::zeros((3, 0))).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
        let err = LineGraph::new(vec![1], vec![(0, 1)], vec![], Array2::zeros((1, 0))).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }

    #[test]
    fn undirected_pairs_merge_reciprocal_edges() {
        let g = LineGraph::new(vec![1, 2, 3], vec![(0, 1), (1, 0), (2, 1)], vec![], Array2::zeros((3, 0)))
            .unwrap();
        assert_eq!(g.undirected_edges(), vec![(0, 1), (1, 2)]);
    }
}
