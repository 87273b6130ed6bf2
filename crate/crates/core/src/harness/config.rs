//! Experiment configuration and its plain-text `key = value` file format.
//!
//! One setting per line; `#` starts a comment; blank lines are ignored.
//! Lists are comma-separated. Example:
//!
//! ```text
//! dataset = synthetic
//! grid = 23x23
//! model = full-gcn
//! clusters = 100
//! batches = 100
//! repetitions = 10
//! seed = 7
//! ```
//!
//! Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `dataset` | `synthetic`, `road` (reads `data_dir`) or `cora` (reads `data_dir`) |
//! | `data_dir` | directory with `segments.csv` + `labels.csv`, or `cora.content` + `cora.cites` |
//! | `grid` | synthetic grid as `ROWSxCOLS` |
//! | `synth_seed`, `labeled_fraction`, `observations`, `highway_fraction`, `correlation_length`, `regional_spread`, `regional_length` | synthetic generator settings |
//! | `cora_validation`, `cora_test`, `cora_per_class` | Cora split sizes; `cora_test = rest` keeps every remaining node |
//! | `model` | `full-gcn`, `gcn-no-adv`, `n2v-base`, `n2v-features`, `n2v-feature-graph`, `naive-1`, `naive-2` |
//! | `clusters`, `batches`, `repetitions`, `seed`, `parallel`, `imbalance` | partitioning and run control |
//! | `epochs`, `gcn_lr`, `discriminator_lr`, `generator_lr`, `hidden`, `embedding`, `decoder_hidden`, `discriminator_hidden`, `decoder_dropout`, `discriminator_dropout`, `noise_std` | GCN settings |
//! | `head_epochs`, `head_hidden`, `head_lr` | MLP head on node2vec embeddings |
//! | `n2v_dims`, `n2v_feature_dims`, `walk_length`, `walks_per_node`, `window`, `negatives`, `n2v_epochs`, `p`, `q` | node2vec settings |
//! | `symmetrize` | treat the graph as undirected for graph convolution (`true`/`false`) |
//! | `output_dir`, `save_models` | where reports go; whether to write checkpoints and loss traces |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::argcn::ArgcnConfig;
use crate::datagen::{CoraSplit, SynthConfig};
use crate::error::{Error, Result};
use crate::n2v::{EmbedMode, HeadConfig, N2vConfig};
use crate::partition::DEFAULT_IMBALANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    FullGcn,
    GcnNoAdv,
    N2vBase,
    /// node2vec with sequence-manipulated feature embeddings.
    N2vFeatures,
    N2vFeatureGraph,
    Naive1,
    Naive2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::FullGcn,
        ModelKind::GcnNoAdv,
        ModelKind::N2vBase,
        ModelKind::N2vFeatures,
        ModelKind::N2vFeatureGraph,
        ModelKind::Naive1,
        ModelKind::Naive2,
    ];

    pub fn is_gcn(self) -> bool {
        matches!(self, ModelKind::FullGcn | ModelKind::GcnNoAdv)
    }

    pub fn embed_mode(self) -> Option<EmbedMode> {
        match self {
            ModelKind::N2vBase => Some(EmbedMode::Base),
            ModelKind::N2vFeatures => Some(EmbedMode::SequenceManipulation),
            ModelKind::N2vFeatureGraph => Some(EmbedMode::FeatureGraph),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::FullGcn => "full-gcn",
            ModelKind::GcnNoAdv => "gcn-no-adv",
            ModelKind::N2vBase => "n2v-base",
            ModelKind::N2vFeatures => "n2v-features",
            ModelKind::N2vFeatureGraph => "n2v-feature-graph",
            ModelKind::Naive1 => "naive-1",
            ModelKind::Naive2 => "naive-2",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| {
                let names: Vec<String> = ModelKind::ALL.iter().map(ToString::to_string).collect();
                Error::Argument(format!("unknown model '{s}' (one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DatasetSource {
    Synthetic(SynthConfig),
    /// `segments.csv` and `labels.csv` in a directory.
    Road(PathBuf),
    Cora { dir: PathBuf, split: CoraSplit },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub model: ModelKind,
    pub clusters: usize,
    pub batches: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Worker threads for batch training; 0 uses every core.
    pub parallel: usize,
    pub imbalance: f64,
    pub symmetrize: bool,
    /// GCN settings; `None` picks the preset matching the dataset.
    pub gcn: Option<ArgcnConfig>,
    pub n2v: N2vConfig,
    pub head: HeadConfig,
    pub output_dir: Option<PathBuf>,
    pub save_models: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource, model: ModelKind) -> Self {
        ExperimentConfig {
            dataset,
            model,
            clusters: 1,
            batches: 1,
            repetitions: 10,
            seed: 0,
            parallel: 0,
            imbalance: DEFAULT_IMBALANCE,
            symmetrize: true,
            gcn: None,
            n2v: N2vConfig::default(),
            head: HeadConfig::default(),
            output_dir: None,
            save_models: false,
        }
    }

    /// GCN settings in effect.
    pub fn gcn_config(&self) -> ArgcnConfig {
        let base = self.gcn.clone().unwrap_or_else(|| match self.dataset {
            DatasetSource::Cora { .. } => ArgcnConfig::cora(),
            _ => ArgcnConfig::road(),
        });
        if self.model == ModelKind::GcnNoAdv {
            base.without_adversarial()
        } else {
            base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.batches == 0 || self.batches > self.clusters {
            return Err(Error::Argument(format!(
                "need 1 ≤ batches ≤ clusters, got {} batches of {} clusters",
                self.batches, self.clusters
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Argument("repetitions must be at least 1".into()));
        }
        if !(self.imbalance >= 1.0) {
            return Err(Error::Argument(format!("imbalance {} must be at least 1", self.imbalance)));
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, msg)| Error::parse(path, line, msg))
    }

    /// Parses the key-value format; errors carry the 1-based line number.
    pub fn parse(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| (n + 1, format!("expected 'key = value', got {line:?}")))?;
            pairs.push((n + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let find = |key: &str| pairs.iter().rev().find(|(_, k, _)| k == key);

        let mut synth = SynthConfig::default();
        let mut cora = CoraSplit::default();
        let mut data_dir = None;
        let mut dataset_kind = ("synthetic".to_string(), 0);
        let mut model = ModelKind::FullGcn;
        // First pass: keys the others depend on.
        if let Some((n, _, v)) = find("dataset") {
            dataset_kind = (v.clone(), *n);
        }
        if let Some((n, _, v)) = find("model") {
            model = v.parse().map_err(|e: Error| (*n, e.to_string()))?;
        }
        let mut cfg = ExperimentConfig::new(DatasetSource::Synthetic(SynthConfig::default()), model);
        let mut gcn = match dataset_kind.0.as_str() {
            "cora" => ArgcnConfig::cora(),
            _ => ArgcnConfig::road(),
        };
        let mut gcn_touched = false;

        for (n, key, value) in &pairs {
            let n = *n;
            let err = |what: &str| (n, format!("invalid {what} for '{key}': {value:?}"));
            let num = || value.parse::<f64>().map_err(|_| err("number"));
            let int = || value.parse::<usize>().map_err(|_| err("integer"));
            let list = || -> std::result::Result<Vec<usize>, (usize, String)> {
                if value.is_empty() {
                    return Ok(Vec::new());
                }
                value.split(',').map(|x| x.trim().parse::<usize>().map_err(|_| err("list"))).collect()
            };
            let flag = || match value.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(err("boolean")),
            };
            match key.as_str() {
                "dataset" | "model" => {}
                "data_dir" => data_dir = Some(PathBuf::from(value)),
                "grid" => {
                    let (r, c) = value.split_once(['x', 'X']).ok_or_else(|| err("grid"))?;
                    synth.rows = r.trim().parse().map_err(|_| err("grid"))?;
                    synth.cols = c.trim().parse().map_err(|_| err("grid"))?;
                }
                "synth_seed" => synth.seed = value.parse().map_err(|_| err("integer"))?,
                "labeled_fraction" => synth.labeled_fraction = num()?,
                "observations" => synth.observations = int()?,
                "highway_fraction" => synth.highway_fraction = num()?,
                "correlation_length" => synth.correlation_length = num()?,
                "regional_spread" => synth.regional_spread = num()?,
                "regional_length" => synth.regional_length = num()?,
                "cora_per_class" => cora.per_class = int()?,
                "cora_validation" => cora.validation = int()?,
                "cora_test" => cora.test = if value == "rest" { None } else { Some(int()?) },
                "clusters" => cfg.clusters = int()?,
                "batches" => cfg.batches = int()?,
                "repetitions" => cfg.repetitions = int()?,
                "seed" => cfg.seed = value.parse().map_err(|_| err("integer"))?,
                "parallel" => cfg.parallel = int()?,
                "imbalance" => cfg.imbalance = num()?,
                "symmetrize" => cfg.symmetrize = flag()?,
                "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
                "save_models" => cfg.save_models = flag()?,
                "head_epochs" => cfg.head.epochs = int()?,
                "head_hidden" => cfg.head.hidden = int()?,
                "head_lr" => cfg.head.lr = num()?,
                "n2v_dims" => cfg.n2v.topology.dims = int()?,
                "n2v_feature_dims" => cfg.n2v.feature.dims = int()?,
                "walk_length" => cfg.n2v.walks.walk_length = int()?,
                "walks_per_node" => cfg.n2v.walks.walks_per_node = int()?,
                "p" => cfg.n2v.walks.p = num()?,
                "q" => cfg.n2v.walks.q = num()?,
                "window" | "negatives" | "n2v_epochs" => {
                    let v = int()?;
                    for sg in [&mut cfg.n2v.topology, &mut cfg.n2v.feature] {
                        match key.as_str() {
                            "window" => sg.window = v,
                            "negatives" => sg.negatives = v,
                            _ => sg.epochs = v,
                        }
                    }
                }
                gcn_key => {
                    gcn_touched = true;
                    match gcn_key {
                        "epochs" => gcn.epochs = int()?,
                        "gcn_lr" => gcn.gcn_lr = num()?,
                        "discriminator_lr" => gcn.discriminator_lr = num()?,
                        "generator_lr" => gcn.generator_lr = num()?,
                        "hidden" => gcn.hidden = int()?,
                        "embedding" => gcn.embedding = int()?,
                        "decoder_hidden" => gcn.decoder_hidden = list()?,
                        "discriminator_hidden" => gcn.discriminator_hidden = list()?,
                        "decoder_dropout" => gcn.decoder_dropout = num()?,
                        "discriminator_dropout" => gcn.discriminator_dropout = num()?,
                        "noise_std" => gcn.noise_std = num()?,
                        _ => return Err((n, format!("unknown key '{key}'"))),
                    }
                }
            }
        }
        if gcn_touched {
            cfg.gcn = Some(gcn);
        }
        let (kind, line) = dataset_kind;
        let need_dir = || data_dir.clone().ok_or((line, format!("dataset '{kind}' needs data_dir")));
        cfg.dataset = match kind.as_str() {
            "synthetic" => DatasetSource::Synthetic(synth),
            "road" => DatasetSource::Road(need_dir()?),
            "cora" => DatasetSource::Cora {
                dir: need_dir()?,
                split: cora,
            },
            other => return Err((line, format!("unknown dataset '{other}' (synthetic, road, cora)"))),
        };
        Ok(cfg)
    }
}
