//! Per-node evaluation, aggregation across repetitions, and report files.
//!
//! Files written to an output directory:
//!
//! - `report.json` — the whole [`RunReport`] except predictions
//! - `metrics.csv` — `metric,mean,median,sem`
//! - `runs.csv` — `repetition,seed,partition_seconds,training_seconds,<metrics…>`
//! - `batches.csv` — `repetition,batch,clusters,nodes,train,test,seconds,skipped`
//! - `predictions.csv` — `repetition,batch,node_id,p_0,…`
//! - `node_metrics.csv` — histograms: `repetition,batch,node_id,intersection,correlation,bhattacharyya,kl_divergence`;
//!   classes: `repetition,batch,node_id,label,p_0,…`

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::ModelKind;
use crate::argcn::Targets;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, cls_metrics, hist_metrics, HistMetrics};

pub const HIST_METRICS: [&str; 4] = ["intersection", "correlation", "bhattacharyya", "kl_divergence"];
pub const CLS_METRICS: [&str; 3] = ["accuracy", "macro_f1", "roc_auc"];

/// Predicted row for one test node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePrediction {
    pub repetition: usize,
    pub batch: usize,
    /// Global node index.
    pub node: usize,
    pub node_id: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeOutcome {
    Histogram(HistMetrics),
    Class { label: usize, probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEvaluation {
    pub repetition: usize,
    pub batch: usize,
    pub node_id: u64,
    pub outcome: NodeOutcome,
}

/// Scores each prediction against the node's target row.
pub fn evaluate_predictions(targets: &Targets, predictions: &[NodePrediction]) -> Result<Vec<NodeEvaluation>> {
    predictions
        .iter()
        .map(|p| {
            if p.node >= targets.len() {
                return Err(Error::Argument(format!("prediction for node {} outside the targets", p.node)));
            }
            let outcome = match targets {
                Targets::Histograms(h) => {
                    let truth = h.row(p.node);
                    NodeOutcome::Histogram(hist_metrics(truth.as_slice().expect("standard layout"), &p.values)?)
                }
                Targets::Classes { labels, .. } => NodeOutcome::Class {
                    label: labels[p.node],
                    probs: p.values.clone(),
                },
            };
            Ok(NodeEvaluation {
                repetition: p.repetition,
                batch: p.batch,
                node_id: p.node_id,
                outcome,
            })
        })
        .collect()
}

/// Metric values of one repetition: means over its test nodes for
/// histograms, pooled classification metrics for classes.
pub fn repetition_metrics(evals: &[&NodeEvaluation]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    match evals.first().map(|e| &e.outcome) {
        None => return Err(Error::InsufficientData("no evaluated test nodes".into())),
        Some(NodeOutcome::Histogram(_)) => {
            let mut sums = [0.0; 4];
            for e in evals {
                let NodeOutcome::Histogram(m) = &e.outcome else {
                    return Err(Error::Argument("mixed evaluation kinds".into()));
                };
                for (s, v) in sums.iter_mut().zip([m.intersection, m.correlation, m.bhattacharyya, m.kl_divergence]) {
                    *s += v;
                }
            }
            for (name, s) in HIST_METRICS.iter().zip(sums) {
                out.insert(name.to_string(), s / evals.len() as f64);
            }
        }
        Some(NodeOutcome::Class { probs, .. }) => {
            let width = probs.len();
            let mut p = Array2::zeros((evals.len(), width));
            let mut labels = Vec::with_capacity(evals.len());
            for (k, e) in evals.iter().enumerate() {
                let NodeOutcome::Class { label, probs } = &e.outcome else {
                    return Err(Error::Argument("mixed evaluation kinds".into()));
                };
                if probs.len() != width {
                    return Err(Error::Shape("class probability rows differ in width".into()));
                }
                p.row_mut(k).assign(&ndarray::ArrayView1::from(probs.as_slice()));
                labels.push(*label);
            }
            let m = cls_metrics(p.view(), &labels)?;
            out.insert("accuracy".into(), m.accuracy);
            out.insert("macro_f1".into(), m.macro_f1);
            out.insert("roc_auc".into(), m.roc_auc);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub sem: f64,
}

/// Groups evaluations by repetition, computes each repetition's metrics and
/// aggregates them. Metrics come out in a fixed order.
pub fn summarize(evals: &[NodeEvaluation]) -> Result<(BTreeMap<usize, BTreeMap<String, f64>>, Vec<MetricSummary>)> {
    let mut by_rep: BTreeMap<usize, Vec<&NodeEvaluation>> = BTreeMap::new();
    for e in evals {
        by_rep.entry(e.repetition).or_default().push(e);
    }
    let per_rep = by_rep
        .into_iter()
        .map(|(r, es)| Ok((r, repetition_metrics(&es)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok((per_rep.clone(), summarize_runs(&per_rep)?))
}

pub fn summarize_runs(per_rep: &BTreeMap<usize, BTreeMap<String, f64>>) -> Result<Vec<MetricSummary>> {
    let Some(first) = per_rep.values().next() else {
        return Err(Error::InsufficientData("no repetitions to summarize".into()));
    };
    let names: Vec<&str> = HIST_METRICS
        .iter()
        .chain(&CLS_METRICS)
        .copied()
        .filter(|n| first.contains_key(*n))
        .collect();
    names
        .into_iter()
        .map(|name| {
            let values: Vec<f64> = per_rep.values().map(|m| m[name]).collect();
            let s = aggregate(&values)?;
            Ok(MetricSummary {
                metric: name.to_string(),
                mean: s.mean,
                median: s.median,
                sem: s.sem,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub repetition: usize,
    pub batch: usize,
    pub clusters: usize,
    pub nodes: usize,
    pub train: usize,
    pub test: usize,
    /// Training plus prediction time; 0 for whole-graph models.
    pub seconds: f64,
    /// No labeled training node: nothing was trained or evaluated.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub partition_seconds: f64,
    pub training_seconds: f64,
    pub batches: Vec<BatchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub dataset: String,
    pub nodes: usize,
    pub clusters: usize,
    pub batches: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub metrics: Vec<MetricSummary>,
    pub runs: Vec<RepetitionResult>,
    pub skipped_batches: usize,
    pub total_seconds: f64,
    /// Peak heap (or resident) bytes during training.
    pub peak_memory_bytes: Option<u64>,
    #[serde(skip)]
    pub predictions: Vec<NodePrediction>,
    #[serde(skip)]
    pub evaluations: Vec<NodeEvaluation>,
}

impl RunReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    /// Mean per-batch training seconds over batches that trained.
    pub fn mean_batch_seconds(&self) -> f64 {
        let times: Vec<f64> = self
            .runs
            .iter()
            .flat_map(|r| &r.batches)
            .filter(|b| !b.skipped)
            .map(|b| b.seconds)
            .collect();
        if times.is_empty() {
            0.0
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        }
    }

    /// Everything except wall-clock and memory figures, for reproducibility
    /// checks.
    pub fn same_results(&self, other: &RunReport) -> bool {
        let strip = |r: &RunReport| {
            r.runs
                .iter()
                .map(|run| {
                    let batches: Vec<_> = run
                        .batches
                        .iter()
                        .map(|b| (b.batch, b.clusters, b.nodes, b.train, b.test, b.skipped))
                        .collect();
                    (run.repetition, run.seed, run.metrics.clone(), batches)
                })
                .collect::<Vec<_>>()
        };
        self.metrics == other.metrics && strip(self) == strip(other) && self.predictions == other.predictions
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(&json, e))?;
        std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
        write_metrics(dir.join("metrics.csv"), &self.metrics)?;

        let path = dir.join("runs.csv");
        let names: Vec<String> = self.metrics.iter().map(|m| m.metric.clone()).collect();
        let mut header = vec!["repetition", "seed", "partition_seconds", "training_seconds"];
        header.extend(names.iter().map(String::as_str));
        write_rows(&path, &header, self.runs.iter().map(|r| {
            let mut row = vec![
                r.repetition.to_string(),
                r.seed.to_string(),
                r.partition_seconds.to_string(),
                r.training_seconds.to_string(),
            ];
            row.extend(names.iter().map(|n| r.metrics[n].to_string()));
            row
        }))?;

        write_rows(
            dir.join("batches.csv"),
            &["repetition", "batch", "clusters", "nodes", "train", "test", "seconds", "skipped"],
            self.runs.iter().flat_map(|r| &r.batches).map(|b| {
                vec![
                    b.repetition.to_string(),
                    b.batch.to_string(),
                    b.clusters.to_string(),
                    b.nodes.to_string(),
                    b.train.to_string(),
                    b.test.to_string(),
                    b.seconds.to_string(),
                    b.skipped.to_string(),
                ]
            }),
        )?;
        write_predictions(dir.join("predictions.csv"), &self.predictions)?;
        write_node_metrics(dir.join("node_metrics.csv"), &self.evaluations)
    }
}

fn write_rows<I: IntoIterator<Item = Vec<String>>>(path: impl AsRef<Path>, header: &[&str], rows: I) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_metrics(path: impl AsRef<Path>, metrics: &[MetricSummary]) -> Result<()> {
    write_rows(
        path,
        &["metric", "mean", "median", "sem"],
        metrics
            .iter()
            .map(|m| vec![m.metric.clone(), m.mean.to_string(), m.median.to_string(), m.sem.to_string()]),
    )
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricSummary>> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    if header != ["metric", "mean", "median", "sem"] {
        return Err(Error::parse(path, 1, "header must be metric,mean,median,sem"));
    }
    rows.into_iter()
        .map(|(line, r)| {
            let num = |k: usize| r[k].parse::<f64>().map_err(|_| Error::parse(path, line, format!("bad number {:?}", r[k])));
            Ok(MetricSummary {
                metric: r[0].clone(),
                mean: num(1)?,
                median: num(2)?,
                sem: num(3)?,
            })
        })
        .collect()
}

fn value_columns(prefix: &str, width: usize) -> impl Iterator<Item = String> + '_ {
    (0..width).map(move |k| format!("{prefix}{k}"))
}

pub fn write_predictions(path: impl AsRef<Path>, predictions: &[NodePrediction]) -> Result<()> {
    let width = predictions.first().map_or(0, |p| p.values.len());
    let mut header = vec!["repetition".to_string(), "batch".into(), "node_id".into()];
    header.extend(value_columns("p_", width));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        predictions.iter().map(|p| {
            let mut row = vec![p.repetition.to_string(), p.batch.to_string(), p.node_id.to_string()];
            row.extend(p.values.iter().map(|v| v.to_string()));
            row
        }),
    )
}

/// Reads predictions, resolving node ids through `index` (node id → global
/// node index).
pub fn read_predictions(path: impl AsRef<Path>, index: &std::collections::HashMap<u64, usize>) -> Result<Vec<NodePrediction>> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    if header.len() < 4 || header[..3] != ["repetition", "batch", "node_id"] {
        return Err(Error::parse(path, 1, "header must be repetition,batch,node_id,p_0,…"));
    }
    rows.into_iter()
        .map(|(line, r)| {
            let bad = |what: &str, v: &str| Error::parse(path, line, format!("invalid {what} {v:?}"));
            let node_id: u64 = r[2].parse().map_err(|_| bad("node id", &r[2]))?;
            Ok(NodePrediction {
                repetition: r[0].parse().map_err(|_| bad("repetition", &r[0]))?,
                batch: r[1].parse().map_err(|_| bad("batch", &r[1]))?,
                node: *index
                    .get(&node_id)
                    .ok_or_else(|| Error::parse(path, line, format!("unknown node {node_id}")))?,
                node_id,
                values: r[3..]
                    .iter()
                    .map(|v| v.parse().map_err(|_| bad("value", v)))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

pub fn write_node_metrics(path: impl AsRef<Path>, evals: &[NodeEvaluation]) -> Result<()> {
    let mut header = vec!["repetition".to_string(), "batch".into(), "node_id".into()];
    match evals.first().map(|e| &e.outcome) {
        Some(NodeOutcome::Class { probs, .. }) => {
            header.push("label".into());
            header.extend(value_columns("p_", probs.len()));
        }
        _ => header.extend(HIST_METRICS.iter().map(|s| s.to_string())),
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        evals.iter().map(|e| {
            let mut row = vec![e.repetition.to_string(), e.batch.to_string(), e.node_id.to_string()];
            match &e.outcome {
                NodeOutcome::Histogram(m) => row.extend(
                    [m.intersection, m.correlation, m.bhattacharyya, m.kl_divergence].iter().map(|v| v.to_string()),
                ),
                NodeOutcome::Class { label, probs } => {
                    row.push(label.to_string());
                    row.extend(probs.iter().map(|v| v.to_string()));
                }
            }
            row
        }),
    )
}

pub fn read_node_metrics(path: impl AsRef<Path>) -> Result<Vec<NodeEvaluation>> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    if header.len() < 4 || header[..3] != ["repetition", "batch", "node_id"] {
        return Err(Error::parse(path, 1, "header must start with repetition,batch,node_id"));
    }
    let classes = header[3] == "label";
    if !classes && header[3..] != HIST_METRICS {
        return Err(Error::parse(path, 1, format!("expected label or {}", HIST_METRICS.join(","))));
    }
    rows.into_iter()
        .map(|(line, r)| {
            let bad = |v: &str| Error::parse(path, line, format!("invalid value {v:?}"));
            let num = |v: &String| v.parse::<f64>().map_err(|_| bad(v));
            let outcome = if classes {
                NodeOutcome::Class {
                    label: r[3].parse().map_err(|_| bad(&r[3]))?,
                    probs: r[4..].iter().map(num).collect::<Result<_>>()?,
                }
            } else {
                NodeOutcome::Histogram(HistMetrics {
                    intersection: num(&r[3])?,
                    correlation: num(&r[4])?,
                    bhattacharyya: num(&r[5])?,
                    kl_divergence: num(&r[6])?,
                })
            };
            Ok(NodeEvaluation {
                repetition: r[0].parse().map_err(|_| bad(&r[0]))?,
                batch: r[1].parse().map_err(|_| bad(&r[1]))?,
                node_id: r[2].parse().map_err(|_| bad(&r[2]))?,
                outcome,
            })
        })
        .collect()
}

/// Header and `(line number, fields)` rows; every row must match the header
/// width.
fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| Error::csv(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rows.push((k + 2, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn preds() -> Vec<NodePrediction> {
        vec![
            NodePrediction { repetition: 0, batch: 0, node: 0, node_id: 10, values: vec![0.5, 0.5] },
            NodePrediction { repetition: 0, batch: 1, node: 1, node_id: 11, values: vec![0.0, 1.0] },
            NodePrediction { repetition: 1, batch: 0, node: 0, node_id: 10, values: vec![1.0, 0.0] },
        ]
    }

    #[test]
    fn histogram_runs_average_nodes_then_repetitions() {
        let t = Targets::Histograms(array![[1.0, 0.0], [0.0, 1.0]]);
        let evals = evaluate_predictions(&t, &preds()).unwrap();
        let (per_rep, summary) = summarize(&evals).unwrap();
        assert_eq!(per_rep[&0]["intersection"], 0.75);
        assert_eq!(per_rep[&1]["intersection"], 1.0);
        let i = &summary[0];
        assert_eq!(i.metric, "intersection");
        assert_eq!((i.mean, i.median), (0.875, 0.875));
        assert_eq!(summary.iter().map(|m| m.metric.as_str()).collect::<Vec<_>>(), HIST_METRICS);
    }

    #[test]
    fn class_runs_pool_nodes() {
        let t = Targets::Classes { labels: vec![0, 1], count: 2 };
        let evals = evaluate_predictions(&t, &preds()[..2]).unwrap();
        let (per_rep, summary) = summarize(&evals).unwrap();
        // Tie at node 10 resolves to class 0.
        assert_eq!(per_rep[&0]["accuracy"], 1.0);
        assert_eq!(summary.iter().map(|m| m.metric.as_str()).collect::<Vec<_>>(), CLS_METRICS);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let index = [(10u64, 0usize), (11, 1)].into_iter().collect();
        write_predictions(dir.path().join("p.csv"), &preds()).unwrap();
        assert_eq!(read_predictions(dir.path().join("p.csv"), &index).unwrap(), preds());

        for t in [
            Targets::Histograms(array![[0.3, 0.7], [0.6, 0.4]]),
            Targets::Classes { labels: vec![1, 0], count: 2 },
        ] {
            let evals = evaluate_predictions(&t, &preds()).unwrap();
            write_node_metrics(dir.path().join("n.csv"), &evals).unwrap();
            assert_eq!(read_node_metrics(dir.path().join("n.csv")).unwrap(), evals);
        }

        let (_, summary) = summarize(&evaluate_predictions(&Targets::Histograms(array![[0.3, 0.7], [0.6, 0.4]]), &preds()).unwrap()).unwrap();
        write_metrics(dir.path().join("m.csv"), &summary).unwrap();
        assert_eq!(read_metrics(dir.path().join("m.csv")).unwrap(), summary);
    }
}
