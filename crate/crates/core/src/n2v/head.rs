use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::argcn::Targets;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Dense, Tape};
use crate::seed::Seed;

/// MLP mapping embeddings to label histograms or class probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            hidden: 32,
            epochs: 2000,
            lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadFit {
    /// One row per embedding row, each summing to 1.
    pub predictions: Array2<f64>,
    /// Training loss after the last update; `None` for zero epochs.
    pub final_loss: Option<f64>,
}

/// Full-batch training of `softmax(ReLU(E·W1 + b1)·W2 + b2)` on `train_rows`
/// with intersection loss (histograms) or cross-entropy (classes). The
/// output layer starts at zero, so an untrained head predicts uniformly.
pub fn regress_head(
    embeddings: &Array2<f64>,
    targets: &Targets,
    train_rows: &[usize],
    config: &HeadConfig,
    seed: Seed,
) -> Result<HeadFit> {
    if train_rows.is_empty() {
        return Err(Error::Config("no labeled training nodes".into()));
    }
    if targets.len() != embeddings.nrows() {
        return Err(Error::Shape(format!(
            "{} target rows for {} embeddings",
            targets.len(),
            embeddings.nrows()
        )));
    }
    if let Some(&r) = train_rows.iter().find(|&&r| r >= embeddings.nrows()) {
        return Err(Error::Argument(format!("training row {r} out of range")));
    }
    let mut rng = seed.rng();
    let mut layers = [
        Dense::new(embeddings.ncols(), config.hidden, &mut rng),
        Dense::zeros(config.hidden, targets.output_dim()),
    ];
    let x = embeddings.select(Axis(0), train_rows);
    let local: Vec<usize> = (0..train_rows.len()).collect();
    let target_rows = match targets {
        Targets::Histograms(h) => Some(h.select(Axis(0), train_rows)),
        Targets::Classes { .. } => None,
    };
    let labels: Vec<usize> = match targets {
        Targets::Classes { labels, count } => {
            let l: Vec<usize> = train_rows.iter().map(|&r| labels[r]).collect();
            if let Some(c) = l.iter().find(|&&c| c >= *count) {
                return Err(Error::Argument(format!("class {c} of {count}")));
            }
            l
        }
        Targets::Histograms(_) => Vec::new(),
    };

    let params: Vec<&Array2<f64>> = layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect();
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr), &params);
    let mut final_loss = None;
    for _ in 0..config.epochs {
        let mut tape = Tape::new();
        let vars = layers.each_ref().map(|l| l.register(&mut tape, true));
        let input = tape.constant(x.clone());
        let h = vars[0].forward(&mut tape, input)?;
        let h = tape.relu(h);
        let o = vars[1].forward(&mut tape, h)?;
        let u = tape.softmax_rows(o);
        let loss = match &target_rows {
            Some(t) => tape.intersection_loss(u, t, &local)?,
            None => tape.cross_entropy(u, &labels, &local)?,
        };
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::Config(format!("head loss diverged to {value}")));
        }
        final_loss = Some(value);
        let mut g = tape.backward(loss);
        let grads: Vec<Array2<f64>> = layers
            .iter()
            .zip(&vars)
            .flat_map(|(l, v)| [g.take_or_zeros(v.weight, &l.weight), g.take_or_zeros(v.bias, &l.bias)])
            .collect();
        let grad_refs: Vec<&Array2<f64>> = grads.iter().collect();
        let [a, b] = &mut layers;
        adam.step(
            &mut [&mut a.weight, &mut a.bias, &mut b.weight, &mut b.bias],
            &grad_refs,
        )?;
    }

    let mut tape = Tape::new();
    let vars = layers.each_ref().map(|l| l.register(&mut tape, false));
    let input = tape.constant(embeddings.clone());
    let h = vars[0].forward(&mut tape, input)?;
    let h = tape.relu(h);
    let o = vars[1].forward(&mut tape, h)?;
    let u = tape.softmax_rows(o);
    Ok(HeadFit {
        predictions: tape.value(u).clone(),
        final_loss,
    })
}
