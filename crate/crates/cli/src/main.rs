//! `speedhist` command-line harness.
//!
//! Exit codes: 0 success, 1 usage or argument error, 2 data error, 3 training
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use speedhist::argcn::ArgcnConfig;
use speedhist::datagen::{generate_synthetic, CoraSplit, LabeledDataset, SynthConfig};
use speedhist::error::{Error, Result};
use speedhist::harness::{
    self, evaluate_predictions, load_dataset, read_node_metrics, read_predictions, summarize, write_metrics,
    write_node_metrics, DatasetSource, ExperimentConfig, MetricSummary, ModelKind, TrackingAllocator,
};
use speedhist::n2v::{embed_with_features, write_embeddings, EmbedMode, N2vConfig};
use speedhist::partition::io::write_assignment;
use speedhist::partition::{edge_cut, partition, DEFAULT_IMBALANCE};
use speedhist::seed::Seed;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

#[derive(Parser)]
#[command(name = "speedhist", version, about = "Travel-speed histogram prediction on road line graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grid road network with speed observations.
    GenData(GenData),
    /// Partition a dataset's line graph into clusters.
    Partition(PartitionArgs),
    /// Train per-batch models and write predictions, checkpoints and metrics.
    Train(Train),
    /// Score predictions against a dataset's labels, one row per node.
    Evaluate(Evaluate),
    /// Aggregate per-node metrics into a mean/median/SEM table.
    Report(Report),
    /// Compute node2vec embeddings.
    Embed(Embed),
    /// Run an experiment described by a config file.
    Run(Run),
}

#[derive(Args)]
struct DataArgs {
    /// Road dataset directory (segments.csv, labels.csv, optional turns.csv).
    #[arg(long, conflicts_with = "cora", required_unless_present = "cora")]
    data: Option<PathBuf>,
    /// Directory holding cora.content and cora.cites.
    #[arg(long)]
    cora: Option<PathBuf>,
}

impl DataArgs {
    fn source(&self) -> DatasetSource {
        match (&self.data, &self.cora) {
            (Some(d), _) => DatasetSource::Road(d.clone()),
            (None, Some(c)) => DatasetSource::Cora {
                dir: c.clone(),
                split: CoraSplit::default(),
            },
            (None, None) => unreachable!("clap requires one of --data/--cora"),
        }
    }

    fn load(&self, seed: u64) -> Result<LabeledDataset> {
        Ok(load_dataset(&self.source(), seed)?.1)
    }
}

#[derive(Args)]
struct GenData {
    /// Grid size as ROWSxCOLS intersections.
    #[arg(long, value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of segments that receive observations.
    #[arg(long)]
    labeled_fraction: Option<f64>,
    /// Mean observations per labeled segment.
    #[arg(long)]
    observations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    clusters: usize,
    #[arg(long, default_value_t = DEFAULT_IMBALANCE)]
    imbalance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; defaults to assignment.csv in the data directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Train {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "full-gcn")]
    model: ModelKind,
    #[arg(long, default_value_t = 1)]
    clusters: usize,
    #[arg(long, default_value_t = 1)]
    batches: usize,
    /// Overrides the preset epoch count (GCN and node2vec head).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    #[arg(long, default_value_t = DEFAULT_IMBALANCE)]
    imbalance: f64,
    /// Skip writing per-batch checkpoints and loss traces.
    #[arg(long)]
    no_checkpoints: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Evaluate {
    #[command(flatten)]
    data: DataArgs,
    /// predictions.csv written by `train`.
    #[arg(long)]
    predictions: PathBuf,
    /// Per-node metrics CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Report {
    /// One or more per-node metrics CSVs from `evaluate` or `train`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Write the table as metric,mean,median,sem.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Embed {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "base")]
    mode: EmbedMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Topology embedding width.
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Run {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got '{s}'"))?;
    let dim = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("invalid grid size '{s}'"));
    Ok((dim(r)?, dim(c)?))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 1,
        Error::Structural(_)
        | Error::InsufficientData(_)
        | Error::Parse { .. }
        | Error::Io { .. }
        | Error::Csv { .. }
        | Error::Json { .. } => 2,
        Error::Config(_) | Error::Shape(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Partition(a) => partition_cmd(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
        Command::Embed(a) => embed(a),
        Command::Run(a) => run(a),
    }
}

fn gen_data(a: GenData) -> Result<()> {
    let mut cfg = SynthConfig::grid(a.grid.0, a.seed);
    cfg.cols = a.grid.1;
    if let Some(f) = a.labeled_fraction {
        cfg.labeled_fraction = f;
    }
    if let Some(n) = a.observations {
        cfg.observations = n;
        cfg.min_observations = cfg.min_observations.min(n);
    }
    let data = generate_synthetic(&cfg)?;
    harness::write_synthetic_dir(&data, &a.out)?;
    println!(
        "{} segments, {} labeled, written to {}",
        data.dataset.graph.node_count(),
        data.dataset.labeled.len(),
        a.out.display()
    );
    Ok(())
}

fn partition_cmd(a: PartitionArgs) -> Result<()> {
    let data = a.data.load(a.seed)?;
    let p = partition(&data.graph, a.clusters, a.imbalance, Seed(a.seed))?;
    let out = match (&a.out, &a.data.data) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) => d.join("assignment.csv"),
        (None, None) => return Err(Error::Argument("--out is required with --cora".into())),
    };
    write_assignment(&out, &data.graph, &p)?;
    let sizes = p.sizes();
    println!(
        "{} clusters, sizes {}..={}, edge cut {}, written to {}",
        p.cluster_count(),
        sizes.iter().min().unwrap_or(&0),
        sizes.iter().max().unwrap_or(&0),
        edge_cut(&data.graph, &p),
        out.display()
    );
    Ok(())
}

fn train(a: Train) -> Result<()> {
    let mut cfg = ExperimentConfig::new(a.data.source(), a.model);
    cfg.clusters = a.clusters;
    cfg.batches = a.batches;
    cfg.repetitions = a.repetitions;
    cfg.seed = a.seed;
    cfg.parallel = a.parallel;
    cfg.imbalance = a.imbalance;
    cfg.output_dir = Some(a.out.clone());
    cfg.save_models = !a.no_checkpoints;
    if let Some(e) = a.epochs {
        let base = cfg.gcn.clone().unwrap_or_else(|| match cfg.dataset {
            DatasetSource::Cora { .. } => ArgcnConfig::cora(),
            _ => ArgcnConfig::road(),
        });
        cfg.gcn = Some(base.with_epochs(e));
        cfg.head.epochs = e;
    }
    let r = harness::run_experiment(&cfg)?;
    print_summary(&r.metrics);
    println!(
        "{} batches skipped; {:.1}s total; results in {}",
        r.skipped_batches,
        r.total_seconds,
        a.out.display()
    );
    Ok(())
}

fn evaluate(a: Evaluate) -> Result<()> {
    let data = a.data.load(0)?;
    let preds = read_predictions(&a.predictions, &data.graph.index_of())?;
    let evals = evaluate_predictions(&data.targets, &preds)?;
    write_node_metrics(&a.out, &evals)?;
    println!("{} nodes scored, written to {}", evals.len(), a.out.display());
    Ok(())
}

fn report(a: Report) -> Result<()> {
    let mut evals = Vec::new();
    for p in &a.inputs {
        evals.extend(read_node_metrics(p)?);
    }
    let (per_rep, summary) = summarize(&evals)?;
    print_summary(&summary);
    println!("{} repetitions, {} nodes", per_rep.len(), evals.len());
    if let Some(out) = &a.out {
        write_metrics(out, &summary)?;
    }
    Ok(())
}

fn embed(a: Embed) -> Result<()> {
    let data = a.data.load(a.seed)?;
    let mut cfg = N2vConfig::default();
    if let Some(d) = a.dims {
        cfg.topology.dims = d;
    }
    let emb = embed_with_features(&data.graph, a.mode, &cfg, Seed(a.seed))?;
    write_embeddings(&a.out, data.graph.node_ids(), &emb)?;
    println!("{}×{} embeddings written to {}", emb.nrows(), emb.ncols(), a.out.display());
    Ok(())
}

fn run(a: Run) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&a.config)?;
    if let Some(out) = a.out {
        cfg.output_dir = Some(out);
    }
    let r = harness::run_experiment(&cfg)?;
    print_summary(&r.metrics);
    if let Some(dir) = &cfg.output_dir {
        println!("results in {}", dir.display());
    }
    Ok(())
}

fn print_summary(metrics: &[MetricSummary]) {
    println!("{:<14} {:>10} {:>10} {:>10}", "metric", "mean", "median", "sem");
    for m in metrics {
        println!("{:<14} {:>10.4} {:>10.4} {:>10.4}", m.metric, m.mean, m.median, m.sem);
    }
}
