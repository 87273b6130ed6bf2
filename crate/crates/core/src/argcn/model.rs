use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{Activation, ArgcnConfig};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::nn::{glorot_uniform, Adam, AdamConfig, Checkpoint, Dense, DenseVars, Tape, Var};
use crate::seed::Seed;
use crate::sparse::CsrMatrix;

/// Features and normalized adjacency of one graph, shared read-only.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub features: Arc<CsrMatrix>,
    pub adjacency: Arc<CsrMatrix>,
}

impl GraphInput {
    pub fn new(features: &Array2<f64>, adjacency: NormalizedAdjacency) -> Result<Self> {
        Self::from_sparse(CsrMatrix::from_dense(features.view()), adjacency.into_matrix())
    }

    pub fn from_sparse(features: CsrMatrix, adjacency: CsrMatrix) -> Result<Self> {
        let n = features.rows();
        if adjacency.rows() != n || adjacency.cols() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows but a {}x{} adjacency",
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        Ok(GraphInput {
            features: Arc::new(features),
            adjacency: Arc::new(adjacency),
        })
    }

    pub fn node_count(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

/// Supervision for the decoder. Rows without labels are ignored; which rows
/// count is decided by the caller's row list.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// N×k label histograms.
    Histograms(Array2<f64>),
    /// Class index per node, out of `count` classes.
    Classes { labels: Vec<usize>, count: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Histograms(h) => h.nrows(),
            Targets::Classes { labels, .. } => labels.len(),
        }
    }

    /// Decoder width these targets call for.
    pub fn output_dim(&self) -> usize {
        match self {
            Targets::Histograms(h) => h.ncols(),
            Targets::Classes { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Losses of one optimization step. The adversarial losses are absent when
/// those phases are disabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub l1: f64,
    pub l2: Option<f64>,
    pub l3: Option<f64>,
}

/// Parameter groups, each with its own optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Encoder,
    Decoder,
    Discriminator,
}

#[derive(Debug, Clone)]
pub struct ArgcnModel {
    config: ArgcnConfig,
    w0: Array2<f64>,
    w1: Array2<f64>,
    decoder: Vec<Dense>,
    discriminator: Vec<Dense>,
    opt_task: Adam,
    opt_discriminator: Adam,
    opt_generator: Adam,
}

struct EncoderVars {
    w0: Var,
    w1: Var,
}

fn dense_params(layers: &[Dense]) -> Vec<&Array2<f64>> {
    layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
}

fn dense_params_mut(layers: &mut [Dense]) -> Vec<&mut Array2<f64>> {
    layers
        .iter_mut()
        .flat_map(|l| [&mut l.weight, &mut l.bias])
        .collect()
}

fn dense_grads(tape_grads: &mut crate::nn::Gradients, vars: &[DenseVars], layers: &[Dense]) -> Vec<Array2<f64>> {
    vars.iter()
        .zip(layers)
        .flat_map(|(v, l)| {
            [
                tape_grads.take_or_zeros(v.weight, &l.weight),
                tape_grads.take_or_zeros(v.bias, &l.bias),
            ]
        })
        .collect()
}

fn mlp(widths: &[usize], rng: &mut impl Rng) -> Vec<Dense> {
    widths
        .windows(2)
        .map(|w| Dense::new(w[0], w[1], rng))
        .collect()
}

impl ArgcnModel {
    /// Glorot-initialized model for `feature_dim` inputs and `output_dim`
    /// decoder outputs (buckets or classes).
    pub fn new(feature_dim: usize, output_dim: usize, config: ArgcnConfig, seed: Seed) -> Result<Self> {
        if feature_dim == 0 || output_dim == 0 || config.hidden == 0 || config.embedding == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        for rate in [config.decoder_dropout, config.discriminator_dropout] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
            }
        }
        let mut rng = seed.named("init").rng();
        let w0 = glorot_uniform(feature_dim, config.hidden, &mut rng);
        let w1 = glorot_uniform(config.hidden, config.embedding, &mut rng);
        let mut widths = vec![config.embedding];
        widths.extend(&config.decoder_hidden);
        widths.push(output_dim);
        let decoder = mlp(&widths, &mut rng);
        let mut widths = vec![config.embedding];
        widths.extend(&config.discriminator_hidden);
        widths.push(1);
        let discriminator = mlp(&widths, &mut rng);

        let task_params: Vec<&Array2<f64>> = [&w0, &w1]
            .into_iter()
            .chain(dense_params(&decoder))
            .collect();
        let opt_task = Adam::new(AdamConfig::with_lr(config.gcn_lr), &task_params);
        let opt_discriminator = Adam::new(
            AdamConfig::with_lr(config.discriminator_lr),
            &dense_params(&discriminator),
        );
        let opt_generator = Adam::new(AdamConfig::with_lr(config.generator_lr), &[&w0, &w1]);
        Ok(ArgcnModel {
            config,
            w0,
            w1,
            decoder,
            discriminator,
            opt_task,
            opt_discriminator,
            opt_generator,
        })
    }

    pub fn config(&self) -> &ArgcnConfig {
        &self.config
    }

    pub fn output_dim(&self) -> usize {
        self.decoder.last().map_or(0, Dense::fan_out)
    }

    pub fn feature_dim(&self) -> usize {
        self.w0.nrows()
    }

    /// Parameters of `group` in optimizer order (weight, bias per dense layer).
    pub fn params(&self, group: Group) -> Vec<&Array2<f64>> {
        match group {
            Group::Encoder => vec![&self.w0, &self.w1],
            Group::Decoder => dense_params(&self.decoder),
            Group::Discriminator => dense_params(&self.discriminator),
        }
    }

    pub fn params_mut(&mut self, group: Group) -> Vec<&mut Array2<f64>> {
        match group {
            Group::Encoder => vec![&mut self.w0, &mut self.w1],
            Group::Decoder => dense_params_mut(&mut self.decoder),
            Group::Discriminator => dense_params_mut(&mut self.discriminator),
        }
    }

    fn check_input(&self, input: &GraphInput) -> Result<()> {
        if input.feature_dim() != self.feature_dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, input has {}",
                self.feature_dim(),
                input.feature_dim()
            )));
        }
        Ok(())
    }

    fn register_encoder(&self, tape: &mut Tape, trainable: bool) -> EncoderVars {
        if trainable {
            EncoderVars {
                w0: tape.param(self.w0.clone()),
                w1: tape.param(self.w1.clone()),
            }
        } else {
            EncoderVars {
                w0: tape.constant(self.w0.clone()),
                w1: tape.constant(self.w1.clone()),
            }
        }
    }

    /// `Z = Â · noise(ReLU(Â · X · W0)) · W1`, then the final activation.
    fn encode_on<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &EncoderVars,
        input: &GraphInput,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let xw = tape.spmm(&input.features, vars.w0)?;
        let h = tape.spmm(&input.adjacency, xw)?;
        let h = tape.relu(h);
        let h = tape.gaussian_noise(h, self.config.noise_std, training, rng)?;
        let hw = tape.matmul(h, vars.w1)?;
        let z = tape.spmm(&input.adjacency, hw)?;
        Ok(match self.config.encoder_activation {
            Activation::Linear => z,
            Activation::Relu => tape.relu(z),
        })
    }

    /// Hidden ReLU layers with dropout, then a softmax output.
    fn decode_on<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[DenseVars],
        z: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let (last, hidden) = vars.split_last().expect("decoder has an output layer");
        let mut h = z;
        for layer in hidden {
            h = layer.forward(tape, h)?;
            h = tape.relu(h);
            h = tape.dropout(h, self.config.decoder_dropout, training, rng)?;
        }
        let logits = last.forward(tape, h)?;
        Ok(tape.softmax_rows(logits))
    }

    /// Hidden ReLU layers with dropout, then a single linear unit (logits).
    fn discriminate_on<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[DenseVars],
        m: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let (last, hidden) = vars.split_last().expect("discriminator has an output layer");
        let mut h = m;
        for layer in hidden {
            h = layer.forward(tape, h)?;
            h = tape.relu(h);
            h = tape.dropout(h, self.config.discriminator_dropout, training, rng)?;
        }
        last.forward(tape, h)
    }

    fn register(layers: &[Dense], tape: &mut Tape, trainable: bool) -> Vec<DenseVars> {
        layers.iter().map(|l| l.register(tape, trainable)).collect()
    }

    pub fn encode<R: Rng + ?Sized>(&self, input: &GraphInput, training: bool, rng: &mut R) -> Result<Array2<f64>> {
        self.check_input(input)?;
        let mut tape = Tape::new();
        let vars = self.register_encoder(&mut tape, false);
        let z = self.encode_on(&mut tape, &vars, input, training, rng)?;
        Ok(tape.value(z).clone())
    }

    pub fn decode<R: Rng + ?Sized>(&self, z: &Array2<f64>, training: bool, rng: &mut R) -> Result<Array2<f64>> {
        if z.ncols() != self.config.embedding {
            return Err(Error::Shape(format!(
                "embedding has {} columns, decoder expects {}",
                z.ncols(),
                self.config.embedding
            )));
        }
        let mut tape = Tape::new();
        let vars = Self::register(&self.decoder, &mut tape, false);
        let zv = tape.constant(z.clone());
        let y = self.decode_on(&mut tape, &vars, zv, training, rng)?;
        Ok(tape.value(y).clone())
    }

    /// Scores in (0, 1) and the logits they come from, both N×1.
    pub fn discriminate<R: Rng + ?Sized>(
        &self,
        m: &Array2<f64>,
        training: bool,
        rng: &mut R,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        if m.ncols() != self.config.embedding {
            return Err(Error::Shape(format!(
                "input has {} columns, discriminator expects {}",
                m.ncols(),
                self.config.embedding
            )));
        }
        let mut tape = Tape::new();
        let vars = Self::register(&self.discriminator, &mut tape, false);
        let mv = tape.constant(m.clone());
        let logits = self.discriminate_on(&mut tape, &vars, mv, training, rng)?;
        let scores = tape.sigmoid(logits);
        Ok((tape.value(scores).clone(), tape.value(logits).clone()))
    }

    /// Inference-mode forward pass: histograms or class probabilities.
    pub fn predict(&self, input: &GraphInput) -> Result<Array2<f64>> {
        // Neither noise nor dropout draws in inference mode.
        let mut rng = Seed(0).rng();
        let z = self.encode(input, false, &mut rng)?;
        self.decode(&z, false, &mut rng)
    }

    fn check_targets(&self, input: &GraphInput, targets: &Targets, rows: &[usize]) -> Result<()> {
        self.check_input(input)?;
        if targets.len() != input.node_count() {
            return Err(Error::Shape(format!(
                "{} target rows for {} nodes",
                targets.len(),
                input.node_count()
            )));
        }
        if targets.output_dim() != self.output_dim() {
            return Err(Error::Shape(format!(
                "targets have {} columns, decoder outputs {}",
                targets.output_dim(),
                self.output_dim()
            )));
        }
        if let Targets::Classes { labels, count } = targets {
            if let Some(&r) = rows.iter().find(|&&r| labels.get(r).is_some_and(|&c| c >= *count)) {
                return Err(Error::Argument(format!("node {r} has class {} of {count}", labels[r])));
            }
        }
        if rows.is_empty() {
            return Err(Error::Config("no labeled training nodes".into()));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= input.node_count()) {
            return Err(Error::Argument(format!("training row {r} out of range")));
        }
        Ok(())
    }

    /// Task loss and its gradients with respect to the encoder and decoder
    /// groups (in that order), plus the embedding `Z` of this forward pass.
    pub fn task_gradients<R: Rng + ?Sized>(
        &self,
        input: &GraphInput,
        targets: &Targets,
        rows: &[usize],
        rng: &mut R,
    ) -> Result<(f64, Vec<Array2<f64>>, Array2<f64>)> {
        self.check_targets(input, targets, rows)?;
        let mut tape = Tape::new();
        let enc = self.register_encoder(&mut tape, true);
        let dec = Self::register(&self.decoder, &mut tape, true);
        let z = self.encode_on(&mut tape, &enc, input, true, rng)?;
        // The decoder is row-wise, so only labeled rows need decoding.
        let z_rows = tape.select_rows(z, rows)?;
        let u = self.decode_on(&mut tape, &dec, z_rows, true, rng)?;
        let local: Vec<usize> = (0..rows.len()).collect();
        let loss = match targets {
            Targets::Histograms(h) => {
                let t = h.select(Axis(0), rows);
                tape.intersection_loss(u, &t, &local)?
            }
            Targets::Classes { labels, .. } => {
                let labels: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
                tape.cross_entropy(u, &labels, &local)?
            }
        };
        let mut g = tape.backward(loss);
        let mut grads = vec![
            g.take_or_zeros(enc.w0, &self.w0),
            g.take_or_zeros(enc.w1, &self.w1),
        ];
        grads.extend(dense_grads(&mut g, &dec, &self.decoder));
        Ok((tape.scalar(loss), grads, tape.value(z).clone()))
    }

    /// `L2 = BCE(D(Q), 1) + BCE(D(Z), 0)` with `Z` constant, and its gradients
    /// with respect to the discriminator.
    pub fn discriminator_gradients<R: Rng + ?Sized>(
        &self,
        z: &Array2<f64>,
        rng: &mut R,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        if z.ncols() != self.config.embedding {
            return Err(Error::Shape(format!(
                "embedding has {} columns, expected {}",
                z.ncols(),
                self.config.embedding
            )));
        }
        let q = Array2::from_shape_simple_fn(z.raw_dim(), || rng.sample::<f64, _>(StandardNormal));
        let mut tape = Tape::new();
        let disc = Self::register(&self.discriminator, &mut tape, true);
        let qv = tape.constant(q);
        let zv = tape.constant(z.clone());
        let real = self.discriminate_on(&mut tape, &disc, qv, true, rng)?;
        let fake = self.discriminate_on(&mut tape, &disc, zv, true, rng)?;
        let l_real = tape.bce_logits(real, 1.0);
        let l_fake = tape.bce_logits(fake, 0.0);
        let loss = tape.add(l_real, l_fake)?;
        let mut g = tape.backward(loss);
        Ok((tape.scalar(loss), dense_grads(&mut g, &disc, &self.discriminator)))
    }

    /// `L3 = BCE(D(encode(X)), 1)` with the discriminator constant, and its
    /// gradients with respect to the encoder.
    pub fn generator_gradients<R: Rng + ?Sized>(
        &self,
        input: &GraphInput,
        rng: &mut R,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        self.check_input(input)?;
        let mut tape = Tape::new();
        let enc = self.register_encoder(&mut tape, true);
        let disc = Self::register(&self.discriminator, &mut tape, false);
        let z = self.encode_on(&mut tape, &enc, input, true, rng)?;
        let fake = self.discriminate_on(&mut tape, &disc, z, true, rng)?;
        let loss = tape.bce_logits(fake, 1.0);
        let mut g = tape.backward(loss);
        let grads = vec![
            g.take_or_zeros(enc.w0, &self.w0),
            g.take_or_zeros(enc.w1, &self.w1),
        ];
        Ok((tape.scalar(loss), grads))
    }

    /// Phase 1: update encoder and decoder on the task loss. Returns the loss
    /// and the embedding computed before the update.
    pub fn phase_task<R: Rng + ?Sized>(
        &mut self,
        input: &GraphInput,
        targets: &Targets,
        rows: &[usize],
        rng: &mut R,
    ) -> Result<(f64, Array2<f64>)> {
        let (loss, grads, z) = self.task_gradients(input, targets, rows, rng)?;
        let grad_refs: Vec<&Array2<f64>> = grads.iter().collect();
        let mut params: Vec<&mut Array2<f64>> = vec![&mut self.w0, &mut self.w1];
        params.extend(dense_params_mut(&mut self.decoder));
        self.opt_task.step(&mut params, &grad_refs)?;
        Ok((loss, z))
    }

    /// Phase 2: update the discriminator to separate prior samples from `z`.
    pub fn phase_discriminator<R: Rng + ?Sized>(&mut self, z: &Array2<f64>, rng: &mut R) -> Result<f64> {
        let (loss, grads) = self.discriminator_gradients(z, rng)?;
        let grad_refs: Vec<&Array2<f64>> = grads.iter().collect();
        self.opt_discriminator
            .step(&mut dense_params_mut(&mut self.discriminator), &grad_refs)?;
        Ok(loss)
    }

    /// Phase 3: update the encoder to fool the discriminator.
    pub fn phase_generator<R: Rng + ?Sized>(&mut self, input: &GraphInput, rng: &mut R) -> Result<f64> {
        let (loss, grads) = self.generator_gradients(input, rng)?;
        let grad_refs: Vec<&Array2<f64>> = grads.iter().collect();
        self.opt_generator
            .step(&mut [&mut self.w0, &mut self.w1], &grad_refs)?;
        Ok(loss)
    }

    /// One full optimization step. Each phase draws from its own stream
    /// derived from `seed`, so disabling the adversarial phases leaves the
    /// task phase's randomness untouched.
    pub fn optimization_step(
        &mut self,
        input: &GraphInput,
        targets: &Targets,
        rows: &[usize],
        seed: Seed,
    ) -> Result<StepLosses> {
        let (l1, z) = self.phase_task(input, targets, rows, &mut seed.named("task").rng())?;
        let mut losses = StepLosses {
            l1,
            l2: None,
            l3: None,
        };
        if self.config.adversarial {
            losses.l2 = Some(self.phase_discriminator(&z, &mut seed.named("discriminator").rng())?);
            losses.l3 = Some(self.phase_generator(input, &mut seed.named("generator").rng())?);
        }
        let finite = [Some(l1), losses.l2, losses.l3]
            .iter()
            .all(|l| l.is_none_or(f64::is_finite));
        if !finite {
            return Err(Error::Config(format!("training diverged: {losses:?}")));
        }
        Ok(losses)
    }

    /// Runs `config.epochs` full-batch optimization steps; step `e` uses
    /// `seed.child(e)`. Returns the per-epoch losses.
    pub fn fit(
        &mut self,
        input: &GraphInput,
        targets: &Targets,
        rows: &[usize],
        seed: Seed,
    ) -> Result<Vec<StepLosses>> {
        self.check_targets(input, targets, rows)?;
        (0..self.config.epochs)
            .map(|epoch| self.optimization_step(input, targets, rows, seed.child(epoch as u64)))
            .collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.push("encoder.0", &self.w0);
        ck.push("encoder.1", &self.w1);
        for (prefix, layers) in [("decoder", &self.decoder), ("discriminator", &self.discriminator)] {
            for (i, l) in layers.iter().enumerate() {
                ck.push(format!("{prefix}.{i}.weight"), &l.weight);
                ck.push(format!("{prefix}.{i}.bias"), &l.bias);
            }
        }
        ck
    }

    /// Replaces all weights with those in `ck`; shapes must match. Optimizer
    /// state is not part of a checkpoint and restarts from zero.
    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        self.w0 = ck.get("encoder.0", self.w0.dim())?;
        self.w1 = ck.get("encoder.1", self.w1.dim())?;
        for (prefix, layers) in [
            ("decoder", &mut self.decoder),
            ("discriminator", &mut self.discriminator),
        ] {
            for (i, l) in layers.iter_mut().enumerate() {
                l.weight = ck.get(&format!("{prefix}.{i}.weight"), l.weight.dim())?;
                l.bias = ck.get(&format!("{prefix}.{i}.bias"), l.bias.dim())?;
            }
        }
        let fresh = ArgcnModel::new(
            self.feature_dim(),
            self.output_dim(),
            self.config.clone(),
            Seed(0),
        )?;
        self.opt_task = fresh.opt_task;
        self.opt_discriminator = fresh.opt_discriminator;
        self.opt_generator = fresh.opt_generator;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }
}

/// Builds a model for `input`/`targets` and trains it. Returns the model and
/// its loss trace.
pub fn train(
    input: &GraphInput,
    targets: &Targets,
    rows: &[usize],
    config: &ArgcnConfig,
    seed: Seed,
) -> Result<(ArgcnModel, Vec<StepLosses>)> {
    let mut model = ArgcnModel::new(
        input.feature_dim(),
        targets.output_dim(),
        config.clone(),
        seed.named("model"),
    )?;
    let trace = model.fit(input, targets, rows, seed.named("steps"))?;
    Ok((model, trace))
}

/// Writes `epoch,l1,l2,l3`; absent adversarial losses are left empty.
pub fn write_loss_trace(path: impl AsRef<Path>, trace: &[StepLosses]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["epoch", "l1", "l2", "l3"])
        .map_err(|e| Error::csv(path, e))?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for (epoch, s) in trace.iter().enumerate() {
        w.write_record([epoch.to_string(), s.l1.to_string(), opt(s.l2), opt(s.l3)])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
