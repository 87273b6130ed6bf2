//! Skip-gram with negative sampling, word2vec style.

use ndarray::Array2;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dims: usize,
    /// Maximum distance between a token and its context.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate; decays linearly to `min_lr`.
    pub lr: f64,
    pub min_lr: f64,
}

impl SkipGramConfig {
    pub fn with_dims(dims: usize) -> Self {
        SkipGramConfig {
            dims,
            ..SkipGramConfig::default()
        }
    }
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dims: 128,
            window: 10,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            min_lr: 0.0001,
        }
    }
}

/// Learns one vector per token `0..vocab_size`. Input vectors start uniform
/// in `±0.5/dims`, output vectors at zero. For every position a window
/// radius is drawn from `1..=window`; each context token's input vector is
/// trained to predict the center token against `negatives` draws from the
/// unigram distribution raised to 0.75. Tokens absent from the corpus keep
/// their initial vectors.
pub fn skipgram_embed(
    corpus: &[Vec<usize>],
    vocab_size: usize,
    config: &SkipGramConfig,
    seed: Seed,
) -> Result<Array2<f64>> {
    if corpus.iter().all(Vec::is_empty) {
        return Err(Error::Argument("empty corpus".into()));
    }
    if config.dims == 0 || config.window == 0 {
        return Err(Error::Argument("dims and window must be positive".into()));
    }
    let mut counts = vec![0u64; vocab_size];
    for &t in corpus.iter().flatten() {
        if t >= vocab_size {
            return Err(Error::Argument(format!("token {t} outside vocabulary of {vocab_size}")));
        }
        counts[t] += 1;
    }
    let noise = WeightedAliasIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)).collect())
        .map_err(|e| Error::Argument(format!("negative sampling table: {e}")))?;

    let d = config.dims;
    let mut rng = seed.rng();
    let bound = 0.5 / d as f32;
    let mut input: Vec<f32> = (0..vocab_size * d)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    let mut output = vec![0f32; vocab_size * d];
    let mut grad = vec![0f32; d];

    let total_words = corpus.iter().map(Vec::len).sum::<usize>() as f64 * config.epochs as f64;
    let mut processed = 0f64;
    for _ in 0..config.epochs {
        for sentence in corpus {
            for (pos, &center) in sentence.iter().enumerate() {
                let progress = processed / total_words;
                let lr = (config.lr * (1.0 - progress)).max(config.min_lr) as f32;
                processed += 1.0;
                let radius = rng.random_range(1..=config.window);
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(sentence.len() - 1);
                for (ctx_pos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let ctx = &mut input[context * d..(context + 1) * d];
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (center, 1.0f32)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == center {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = &mut output[target * d..(target + 1) * d];
                        let dot = dot(ctx, out);
                        let g = (label - sigmoid(dot)) * lr;
                        for ((gr, o), c) in grad.iter_mut().zip(out.iter_mut()).zip(ctx.iter()) {
                            *gr += g * *o;
                            *o += g * c;
                        }
                    }
                    for (c, gr) in ctx.iter_mut().zip(&grad) {
                        *c += gr;
                    }
                }
            }
        }
    }
    Ok(Array2::from_shape_vec((vocab_size, d), input.into_iter().map(f64::from).collect())
        .expect("vocab_size × dims values"))
}

/// Eight independent partial sums so the loop vectorizes.
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

fn sigmoid(x: f32) -> f32 {
    if x > 30.0 {
        1.0
    } else if x < -30.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}
