//! Random-walk node embeddings and the static baselines built on them.
//!
//! The topology is embedded by node2vec walks fed to skip-gram. Node
//! features can be added in two ways, each producing one extra embedding per
//! feature that is concatenated onto the topology vector:
//!
//! * feature graph — walk a weighted graph over feature values whose edges
//!   count value pairs on line-graph edges;
//! * sequence manipulation — reuse the topology walks with every node
//!   replaced by its feature value, so value sequences follow real paths.
//!
//! Continuous features are cut into deciles first.

mod features;
mod head;
mod skipgram;
mod walks;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use features::{
    build_feature_graph, decile_codes, discretize, sequence_manipulation, FeatureGraph, FeatureTokens,
};
pub use head::{regress_head, HeadConfig, HeadFit};
pub use skipgram::{skipgram_embed, SkipGramConfig};
pub use walks::{random_walks, WalkConfig, WalkCorpus, WeightedDigraph};

use crate::error::{Error, Result};
use crate::graph::LineGraph;
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbedMode {
    Base,
    FeatureGraph,
    SequenceManipulation,
}

impl fmt::Display for EmbedMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbedMode::Base => "base",
            EmbedMode::FeatureGraph => "feature-graph",
            EmbedMode::SequenceManipulation => "sequence-manipulation",
        })
    }
}

impl FromStr for EmbedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(EmbedMode::Base),
            "feature-graph" => Ok(EmbedMode::FeatureGraph),
            "sequence-manipulation" => Ok(EmbedMode::SequenceManipulation),
            _ => Err(Error::Argument(format!(
                "unknown embedding mode '{s}' (base, feature-graph, sequence-manipulation)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct N2vConfig {
    pub walks: WalkConfig,
    pub topology: SkipGramConfig,
    /// Applied to every feature embedding.
    pub feature: SkipGramConfig,
}

impl Default for N2vConfig {
    fn default() -> Self {
        N2vConfig {
            walks: WalkConfig::default(),
            topology: SkipGramConfig::with_dims(128),
            feature: SkipGramConfig::with_dims(32),
        }
    }
}

impl N2vConfig {
    /// Width of the embedding table for `mode` on a graph with
    /// `feature_columns` raw features.
    pub fn output_dim(&self, mode: EmbedMode, feature_columns: usize) -> usize {
        match mode {
            EmbedMode::Base => self.topology.dims,
            _ => self.topology.dims + feature_columns * self.feature.dims,
        }
    }
}

/// Topology walks and the skip-gram table learned from them.
#[derive(Debug, Clone)]
pub struct TopologyEmbedding {
    pub walks: WalkCorpus,
    /// One row per node.
    pub table: Array2<f64>,
}

pub fn embed_topology(g: &LineGraph, config: &N2vConfig, seed: Seed) -> Result<TopologyEmbedding> {
    let walks = random_walks(&WeightedDigraph::from_line_graph(g), &config.walks, seed.named("walks"))?;
    let table = skipgram_embed(&walks.sequences, g.node_count(), &config.topology, seed.named("topology"))?;
    Ok(TopologyEmbedding { walks, table })
}

/// One row per node: the topology embedding, followed in non-base modes by
/// one block per raw feature column looked up by the node's feature value.
pub fn embed_with_features(g: &LineGraph, mode: EmbedMode, config: &N2vConfig, seed: Seed) -> Result<Array2<f64>> {
    let topology = embed_topology(g, config, seed)?;
    extend_with_features(g, mode, &topology, config, seed)
}

/// Feature blocks for `mode` appended to an existing topology embedding.
/// With the same `seed`, equals [`embed_with_features`], so several modes
/// can share one topology run.
pub fn extend_with_features(
    g: &LineGraph,
    mode: EmbedMode,
    topology: &TopologyEmbedding,
    config: &N2vConfig,
    seed: Seed,
) -> Result<Array2<f64>> {
    if topology.table.nrows() != g.node_count() {
        return Err(Error::Shape(format!(
            "topology embedding has {} rows for {} nodes",
            topology.table.nrows(),
            g.node_count()
        )));
    }
    if mode == EmbedMode::Base || g.schema().is_empty() {
        return Ok(topology.table.clone());
    }
    let dg = discretize(g)?;
    let blocks = (0..dg.schema().len())
        .into_par_iter()
        .map(|c| {
            let fseed = seed.named("feature").child(c as u64);
            let (corpus, tokens) = match mode {
                EmbedMode::FeatureGraph => {
                    let fg = build_feature_graph(&dg, c)?;
                    (random_walks(&fg.graph, &config.walks, fseed.named("walks"))?, fg.tokens)
                }
                _ => sequence_manipulation(&topology.walks, &dg, c)?,
            };
            let table = skipgram_embed(&corpus.sequences, tokens.values.len(), &config.feature, fseed)?;
            Ok(features::lookup(&table, &tokens.tokens))
        })
        .collect::<Result<Vec<Array2<f64>>>>()?;
    let mut views = vec![topology.table.view()];
    views.extend(blocks.iter().map(|b| b.view()));
    Ok(concatenate(Axis(1), &views).expect("blocks share the node count"))
}

/// CSV with header `node_id,v_0,…,v_{d-1}`.
pub fn write_embeddings(path: impl AsRef<Path>, node_ids: &[u64], embeddings: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    if node_ids.len() != embeddings.nrows() {
        return Err(Error::Shape(format!(
            "{} node ids for {} embedding rows",
            node_ids.len(),
            embeddings.nrows()
        )));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["node_id".to_string()];
    header.extend((0..embeddings.ncols()).map(|k| format!("v_{k}")));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for (id, row) in node_ids.iter().zip(embeddings.rows()) {
        let mut rec = vec![id.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_embeddings`].
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(Vec<u64>, Array2<f64>)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let dims = r.headers().map_err(|e| Error::csv(path, e))?.len().saturating_sub(1);
    let (mut ids, mut data) = (Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = k + 2;
        if rec.len() != dims + 1 {
            return Err(Error::parse(path, line, format!("{} fields, expected {}", rec.len(), dims + 1)));
        }
        ids.push(rec[0].parse().map_err(|_| Error::parse(path, line, format!("bad node id '{}'", &rec[0])))?);
        for f in rec.iter().skip(1) {
            data.push(f.parse::<f64>().map_err(|_| Error::parse(path, line, format!("bad value '{f}'")))?);
        }
    }
    let table = Array2::from_shape_vec((ids.len(), dims), data).expect("rows checked above");
    Ok((ids, table))
}
