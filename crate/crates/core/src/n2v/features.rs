//! Feature values as walk tokens: the feature-graph and the
//! sequence-manipulation views of a node feature.

use std::collections::HashMap;

use ndarray::Array2;

use super::walks::{WalkCorpus, WeightedDigraph};
use crate::error::{Error, Result};
use crate::graph::{FeatureColumn, FeatureKind, LineGraph};

/// Distinct values of one feature column and each node's index into them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTokens {
    /// Sorted ascending.
    pub values: Vec<f64>,
    /// Per node, an index into `values`.
    pub tokens: Vec<usize>,
}

impl FeatureTokens {
    pub fn of(g: &LineGraph, column: usize) -> Result<Self> {
        if column >= g.schema().len() {
            return Err(Error::Argument(format!(
                "feature column {column} outside a {}-column schema",
                g.schema().len()
            )));
        }
        let raw = g.raw_features().column(column);
        if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
            return Err(Error::Structural(format!("non-finite feature value {v}")));
        }
        let mut values: Vec<f64> = raw.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let tokens = raw
            .iter()
            .map(|v| values.binary_search_by(|x| x.total_cmp(v)).expect("value collected above"))
            .collect();
        Ok(FeatureTokens { values, tokens })
    }
}

/// Decile code 0–9 per value: `floor(10 · #{values < v} / n)`, capped at 9.
/// Ties share a code, so heavily repeated values may leave codes unused.
pub fn decile_codes(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len();
    values
        .iter()
        .map(|v| {
            let below = sorted.partition_point(|x| x < v);
            ((10 * below / n).min(9)) as f64
        })
        .collect()
}

/// Copy of `g` whose continuous columns are replaced by decile codes and
/// marked categorical.
pub fn discretize(g: &LineGraph) -> Result<LineGraph> {
    let mut raw = g.raw_features().clone();
    let mut schema = g.schema().to_vec();
    for (c, col) in schema.iter_mut().enumerate() {
        if col.kind == FeatureKind::Continuous {
            let codes = decile_codes(&raw.column(c).to_vec());
            raw.column_mut(c).assign(&ndarray::Array1::from(codes));
            *col = FeatureColumn::new(col.name.clone(), FeatureKind::Categorical);
        }
    }
    LineGraph::new(g.node_ids().to_vec(), g.edges().to_vec(), schema, raw)
}

/// Weighted directed graph over the distinct values of one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGraph {
    pub tokens: FeatureTokens,
    /// Nodes index `tokens.values`.
    pub graph: WeightedDigraph,
}

/// Edge `a → b` weighs the number of line-graph edges `(i, j)` whose
/// endpoints carry values `a` and `b`.
pub fn build_feature_graph(g: &LineGraph, column: usize) -> Result<FeatureGraph> {
    let tokens = FeatureTokens::of(g, column)?;
    if g.schema()[column].kind != FeatureKind::Categorical {
        return Err(Error::Argument(format!(
            "feature '{}' is continuous; discretize it first",
            g.schema()[column].name
        )));
    }
    let mut counts: HashMap<(usize, usize), f64> = HashMap::new();
    for &(i, j) in g.edges() {
        *counts.entry((tokens.tokens[i], tokens.tokens[j])).or_default() += 1.0;
    }
    let graph = WeightedDigraph::new(
        tokens.values.len(),
        counts.into_iter().map(|((a, b), w)| (a, b, w)),
    )?;
    Ok(FeatureGraph { tokens, graph })
}

/// Replaces every node of every walk by its feature-value token. Walk
/// shapes are unchanged; tokens index the returned `values`.
pub fn sequence_manipulation(
    walks: &WalkCorpus,
    g: &LineGraph,
    column: usize,
) -> Result<(WalkCorpus, FeatureTokens)> {
    let tokens = FeatureTokens::of(g, column)?;
    let sequences = walks
        .sequences
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|&v| {
                    tokens
                        .tokens
                        .get(v)
                        .copied()
                        .ok_or_else(|| Error::Structural(format!("walk visits unknown node {v}")))
                })
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        WalkCorpus {
            sequences,
            walk_length: walks.walk_length,
            walks_per_node: walks.walks_per_node,
        },
        tokens,
    ))
}

/// Row `i` is `table[tokens[i]]`.
pub(crate) fn lookup(table: &Array2<f64>, tokens: &[usize]) -> Array2<f64> {
    table.select(ndarray::Axis(0), tokens)
}
