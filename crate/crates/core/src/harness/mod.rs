//! Experiment driver: partition, batch, train, evaluate, repeat.
//!
//! Every repetition `r` partitions the graph afresh with `Seed(seed).child(r)`
//! and forms batches from the clusters. Batches fix the train/test nodes:
//! a dataset's own split is restricted to each batch, otherwise each batch's
//! labeled nodes are split two-thirds/one-third. GCN models train one model
//! per batch, in parallel; node2vec and naive models train once on the whole
//! graph using the union of the batch training nodes, so all models are
//! scored on the same test nodes.

pub mod config;
pub mod memory;
pub mod report;

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

pub use config::{DatasetSource, ExperimentConfig, ModelKind};
pub use memory::{peak_bytes, reset_peak, TrackingAllocator};
pub use report::{
    evaluate_predictions, read_metrics, read_node_metrics, read_predictions, summarize, summarize_runs,
    write_metrics, write_node_metrics, write_predictions, BatchResult, MetricSummary, NodeEvaluation,
    NodeOutcome, NodePrediction, RepetitionResult, RunReport, CLS_METRICS, HIST_METRICS,
};

use crate::argcn::{self, ArgcnConfig, GraphInput, Targets};
use crate::datagen::{
    generate_synthetic, load_cora_dir, naive_baseline_1, naive_baseline_2, read_labels, road_dataset, write_labels,
    LabeledDataset, Split, SPEED_LIMIT,
};
use crate::error::{Error, Result};
use crate::graph::io::{read_banned_turns, read_network, write_banned_turns, write_network, write_observations};
use crate::graph::{normalize_adjacency, SpeedHistogram, DEFAULT_BUCKET_WIDTH};
use crate::n2v::embed_with_features;
use crate::n2v::regress_head;
use crate::partition::{form_batches, partition, Batch};
use crate::seed::Seed;

/// Loads the configured dataset; returns a display name and the data.
pub fn load_dataset(source: &DatasetSource, seed: u64) -> Result<(String, LabeledDataset)> {
    match source {
        DatasetSource::Synthetic(c) => Ok((
            format!("synthetic-{}x{}", c.rows, c.cols),
            generate_synthetic(c)?.dataset,
        )),
        DatasetSource::Road(dir) => Ok((dir.display().to_string(), load_road_dir(dir)?)),
        DatasetSource::Cora { dir, split } => Ok((
            "cora".into(),
            load_cora_dir(dir, split, Seed(seed).named("cora-split"))?,
        )),
    }
}

/// Reads `segments.csv`, `labels.csv` and, when present, `turns.csv` from
/// `dir`.
pub fn load_road_dir(dir: impl AsRef<Path>) -> Result<LabeledDataset> {
    let dir = dir.as_ref();
    let mut network = read_network(dir.join("segments.csv"))?;
    let turns = dir.join("turns.csv");
    if turns.exists() {
        read_banned_turns(&turns, &mut network)?;
    }
    let labels = read_labels(dir.join("labels.csv"))?;
    road_dataset(&network, &labels)
}

/// Writes a generated dataset in the layout [`load_road_dir`] reads, plus
/// `observations.csv`.
pub fn write_synthetic_dir(data: &crate::datagen::SyntheticData, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_network(&data.network, dir.join("segments.csv"))?;
    write_banned_turns(&data.network, dir.join("turns.csv"))?;
    write_observations(
        dir.join("observations.csv"),
        data.observations.iter().map(|(&id, v)| (id, v.as_slice())),
    )?;
    let g = &data.dataset.graph;
    let Targets::Histograms(h) = &data.dataset.targets else {
        unreachable!("synthetic data has histogram targets")
    };
    let labels = data
        .dataset
        .labeled
        .iter()
        .map(|&v| Ok((g.node_ids()[v], SpeedHistogram::new(h.row(v).to_vec(), DEFAULT_BUCKET_WIDTH)?)))
        .collect::<Result<_>>()?;
    write_labels(dir.join("labels.csv"), &labels)
}

/// Loads the dataset and runs the experiment; writes report files when an
/// output directory is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let (name, data) = load_dataset(&config.dataset, config.seed)?;
    run_on_dataset(config, &name, &data)
}

/// Node sets of one batch, in local indices.
struct BatchPlan<'a> {
    batch: &'a Batch,
    split: Split,
}

pub fn run_on_dataset(config: &ExperimentConfig, name: &str, data: &LabeledDataset) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let g = &data.graph;
    if config.clusters > g.node_count() {
        return Err(Error::Argument(format!(
            "{} clusters requested for {} nodes",
            config.clusters,
            g.node_count()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut runs = Vec::with_capacity(config.repetitions);
    let mut predictions = Vec::new();
    let mut peak: Option<u64> = None;
    for rep in 0..config.repetitions {
        let rep_seed = Seed(config.seed).child(rep as u64);
        let t = Instant::now();
        let parts = partition(g, config.clusters, config.imbalance, rep_seed.named("partition"))?;
        let batches = form_batches(g, &parts, config.batches, rep_seed.named("batches"))?;
        let partition_seconds = t.elapsed().as_secs_f64();
        let plans: Vec<BatchPlan> = batches
            .iter()
            .map(|b| BatchPlan {
                batch: b,
                split: batch_split(data, b, rep_seed.named("split").child(b.index as u64)),
            })
            .collect();

        reset_peak();
        let t = Instant::now();
        let (batch_results, mut preds) = if config.model.is_gcn() {
            run_gcn(config, data, &plans, rep, rep_seed, &pool)?
        } else {
            run_whole_graph(config, data, &plans, rep, rep_seed, &pool)?
        };
        let training_seconds = t.elapsed().as_secs_f64();
        if let Some(p) = peak_bytes() {
            peak = Some(peak.map_or(p, |q| q.max(p)));
        }

        let evals = evaluate_predictions(&data.targets, &preds)?;
        let refs: Vec<&NodeEvaluation> = evals.iter().collect();
        let metrics = report::repetition_metrics(&refs)?;
        log::info!(
            "{} repetition {rep}: {} test nodes, {:.1}s partition, {:.1}s training",
            config.model,
            preds.len(),
            partition_seconds,
            training_seconds
        );
        runs.push(RepetitionResult {
            repetition: rep,
            seed: rep_seed.0,
            metrics,
            partition_seconds,
            training_seconds,
            batches: batch_results,
        });
        predictions.append(&mut preds);
    }

    let evaluations = evaluate_predictions(&data.targets, &predictions)?;
    let per_rep = runs.iter().map(|r| (r.repetition, r.metrics.clone())).collect();
    let metrics = summarize_runs(&per_rep)?;
    let skipped_batches = runs.iter().flat_map(|r| &r.batches).filter(|b| b.skipped).count();
    let report = RunReport {
        model: config.model,
        dataset: name.to_string(),
        nodes: g.node_count(),
        clusters: config.clusters,
        batches: config.batches,
        repetitions: config.repetitions,
        seed: config.seed,
        metrics,
        runs,
        skipped_batches,
        total_seconds: start.elapsed().as_secs_f64(),
        peak_memory_bytes: peak,
        predictions,
        evaluations,
    };
    if let Some(dir) = &config.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

fn batch_split(data: &LabeledDataset, b: &Batch, seed: Seed) -> Split {
    match &data.split {
        Some(s) => s.restrict(&b.nodes),
        None => {
            let labeled: Vec<usize> = b
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, v)| data.labeled.binary_search(v).is_ok())
                .map(|(k, _)| k)
                .collect();
            Split::two_thirds(&labeled, seed)
        }
    }
}

fn batch_result(rep: usize, plan: &BatchPlan, seconds: f64, skipped: bool) -> BatchResult {
    BatchResult {
        repetition: rep,
        batch: plan.batch.index,
        clusters: plan.batch.clusters.len(),
        nodes: plan.batch.len(),
        train: plan.split.train.len(),
        test: plan.split.test.len(),
        seconds,
        skipped,
    }
}

fn prediction_rows(rep: usize, plan: &BatchPlan, ids: &[u64], pred: &Array2<f64>, global: bool) -> Vec<NodePrediction> {
    plan.split
        .test
        .iter()
        .map(|&k| {
            let node = plan.batch.nodes[k];
            let row = if global { node } else { k };
            NodePrediction {
                repetition: rep,
                batch: plan.batch.index,
                node,
                node_id: ids[node],
                values: pred.row(row).to_vec(),
            }
        })
        .collect()
}

/// Divides each row by its sum; all-zero rows stay zero.
pub fn row_normalize(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let s: f64 = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
    out
}

type Outcome = (Vec<BatchResult>, Vec<NodePrediction>);

fn run_gcn(
    config: &ExperimentConfig,
    data: &LabeledDataset,
    plans: &[BatchPlan],
    rep: usize,
    rep_seed: Seed,
    pool: &rayon::ThreadPool,
) -> Result<Outcome> {
    let gcn = config.gcn_config();
    let ids = data.graph.node_ids();
    let outcomes: Vec<Result<Outcome>> = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| {
                if plan.split.train.is_empty() {
                    log::warn!(
                        "repetition {rep} batch {}: no labeled training node, skipped",
                        plan.batch.index
                    );
                    return Ok((vec![batch_result(rep, plan, 0.0, true)], Vec::new()));
                }
                let t = Instant::now();
                let seed = rep_seed.named("batch").child(plan.batch.index as u64);
                let pred = train_batch(config, &gcn, data, plan, rep, seed)?;
                let seconds = t.elapsed().as_secs_f64();
                log::debug!(
                    "repetition {rep} batch {}: {} nodes, {:.2}s",
                    plan.batch.index,
                    plan.batch.len(),
                    seconds
                );
                Ok((
                    vec![batch_result(rep, plan, seconds, false)],
                    prediction_rows(rep, plan, ids, &pred, false),
                ))
            })
            .collect()
    });
    let mut all: Outcome = (Vec::new(), Vec::new());
    for o in outcomes {
        let (mut b, mut p) = o?;
        all.0.append(&mut b);
        all.1.append(&mut p);
    }
    Ok(all)
}

fn train_batch(
    config: &ExperimentConfig,
    gcn: &ArgcnConfig,
    data: &LabeledDataset,
    plan: &BatchPlan,
    rep: usize,
    seed: Seed,
) -> Result<Array2<f64>> {
    let graph = &plan.batch.graph;
    let features = if data.is_classification() {
        row_normalize(graph.features())
    } else {
        graph.features().clone()
    };
    let input = GraphInput::new(&features, normalize_adjacency(graph, config.symmetrize))?;
    let targets = data.targets_of(&plan.batch.nodes);
    let (model, trace) = argcn::train(&input, &targets, &plan.split.train, gcn, seed.named("train"))?;
    if config.save_models {
        if let Some(dir) = &config.output_dir {
            let dir = dir.join("models");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let stem = format!("r{rep}_b{}", plan.batch.index);
            model.save(dir.join(format!("{stem}.json")))?;
            argcn::write_loss_trace(dir.join(format!("{stem}_loss.csv")), &trace)?;
        }
    }
    model.predict(&input)
}

fn run_whole_graph(
    config: &ExperimentConfig,
    data: &LabeledDataset,
    plans: &[BatchPlan],
    rep: usize,
    rep_seed: Seed,
    pool: &rayon::ThreadPool,
) -> Result<Outcome> {
    let mut train: Vec<usize> = plans
        .iter()
        .flat_map(|p| p.split.train.iter().map(|&k| p.batch.nodes[k]))
        .collect();
    train.sort_unstable();
    if train.is_empty() {
        return Err(Error::InsufficientData("no labeled training nodes in any batch".into()));
    }
    let hist = |what: &str| match &data.targets {
        Targets::Histograms(h) => Ok(h),
        Targets::Classes { .. } => Err(Error::Config(format!("{what} needs histogram targets"))),
    };
    let pred = match config.model {
        ModelKind::Naive1 => {
            let h = hist("naive-1")?;
            let row = naive_baseline_1(h.view(), &train)?;
            let mut p = Array2::zeros(h.raw_dim());
            p.rows_mut().into_iter().for_each(|mut r| r.assign(&row));
            p
        }
        ModelKind::Naive2 => {
            let h = hist("naive-2")?;
            let col = data
                .graph
                .column_index(SPEED_LIMIT)
                .ok_or_else(|| Error::Config(format!("naive-2 needs a '{SPEED_LIMIT}' feature")))?;
            let limits: Vec<f64> = data.graph.raw_features().column(col).to_vec();
            naive_baseline_2(h.view(), &limits, &train)?.predict_all(&limits)
        }
        m => {
            let mode = m.embed_mode().expect("GCN models handled elsewhere");
            let emb = pool.install(|| embed_with_features(&data.graph, mode, &config.n2v, rep_seed.named("n2v")))?;
            regress_head(&emb, &data.targets, &train, &config.head, rep_seed.named("head"))?.predictions
        }
    };
    let ids = data.graph.node_ids();
    let results = plans.iter().map(|p| batch_result(rep, p, 0.0, false)).collect();
    let preds = plans.iter().flat_map(|p| prediction_rows(rep, p, ids, &pred, true)).collect();
    Ok((results, preds))
}
