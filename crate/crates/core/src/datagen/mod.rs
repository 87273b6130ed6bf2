//! Datasets: a synthetic road network with speed histograms, the Cora
//! citation graph, and the two naive histogram predictors.

mod cora;
mod labels;
mod naive;
mod synth;

use rand::seq::SliceRandom;

pub use cora::{load_cora, load_cora_dir, CoraSplit, CORA_CLASSES};
pub use labels::{read_labels, write_labels};
pub use naive::{naive_baseline_1, naive_baseline_2, LimitBaseline};
pub use synth::{generate_synthetic, road_dataset, SynthConfig, SyntheticData, SPEED_LIMIT};

use crate::argcn::Targets;
use crate::error::{Error, Result};
use crate::graph::LineGraph;
use crate::seed::Seed;

/// Node index sets; disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Shuffles `rows` and keeps `round(2n/3)` for training, the rest for
    /// testing.
    pub fn two_thirds(rows: &[usize], seed: Seed) -> Split {
        let mut rows = rows.to_vec();
        rows.shuffle(&mut seed.rng());
        let n_train = (2 * rows.len() + 1) / 3;
        let test = rows.split_off(n_train);
        rows.sort_unstable();
        let mut test = test;
        test.sort_unstable();
        Split {
            train: rows,
            validation: Vec::new(),
            test,
        }
    }

    /// Split restricted to `nodes` (global indices) and re-indexed locally:
    /// local `k` is `nodes[k]`.
    pub fn restrict(&self, nodes: &[usize]) -> Split {
        let local = |rows: &[usize]| -> Vec<usize> {
            nodes
                .iter()
                .enumerate()
                .filter(|(_, v)| rows.binary_search(v).is_ok())
                .map(|(k, _)| k)
                .collect()
        };
        Split {
            train: local(&self.train),
            validation: local(&self.validation),
            test: local(&self.test),
        }
    }
}

/// A graph with supervision.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub graph: LineGraph,
    /// One row per node; rows outside `labeled` are placeholders (zero
    /// histograms or class 0).
    pub targets: Targets,
    /// Nodes carrying a label, ascending.
    pub labeled: Vec<usize>,
    /// Fixed split shipped with the dataset; `None` means the caller splits
    /// `labeled` itself.
    pub split: Option<Split>,
}

impl LabeledDataset {
    pub fn new(graph: LineGraph, targets: Targets, mut labeled: Vec<usize>, split: Option<Split>) -> Result<Self> {
        if targets.len() != graph.node_count() {
            return Err(Error::Shape(format!(
                "{} target rows for {} nodes",
                targets.len(),
                graph.node_count()
            )));
        }
        labeled.sort_unstable();
        labeled.dedup();
        if labeled.last().is_some_and(|&v| v >= graph.node_count()) {
            return Err(Error::Argument("labeled node outside the graph".into()));
        }
        if let Some(s) = &split {
            for rows in [&s.train, &s.validation, &s.test] {
                if rows.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Argument("split rows must be strictly ascending".into()));
                }
                if rows.iter().any(|r| labeled.binary_search(r).is_err()) {
                    return Err(Error::Argument("split contains an unlabeled node".into()));
                }
            }
            let overlaps = |a: &[usize], b: &[usize]| a.iter().any(|r| b.binary_search(r).is_ok());
            if overlaps(&s.train, &s.test) || overlaps(&s.train, &s.validation) || overlaps(&s.validation, &s.test) {
                return Err(Error::Argument("split sets overlap".into()));
            }
        }
        Ok(LabeledDataset {
            graph,
            targets,
            labeled,
            split,
        })
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.targets, Targets::Classes { .. })
    }

    /// Targets of the given nodes, in order.
    pub fn targets_of(&self, nodes: &[usize]) -> Targets {
        match &self.targets {
            Targets::Histograms(h) => Targets::Histograms(h.select(ndarray::Axis(0), nodes)),
            Targets::Classes { labels, count } => Targets::Classes {
                labels: nodes.iter().map(|&v| labels[v]).collect(),
                count: *count,
            },
        }
    }
}
