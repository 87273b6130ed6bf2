//! Synthetic road networks with travel-speed observations.
//!
//! Intersections sit on a grid; every pair of neighbors is joined by two
//! one-way segments and U-turns are banned. Each grid line is a road with a
//! category (local, collector, arterial) and a speed limit drawn from the
//! category's share of the palette. A spatially smooth congestion field over
//! the intersections slows traffic, so a segment's speed depends on its own
//! features and on where it lies — the second part is what graph
//! convolution can recover from neighbors. An optional second smooth field,
//! the regional driving profile (off by default), scales speeds up or down
//! by area — town versus countryside under the same limit — and no feature
//! exposes it.
//!
//! A segment's speed distribution is a normal truncated to the histogram
//! range, with mean
//!
//! ```text
//! limit / 3.6 · (1 + spread · (2·region − 1)) · (1 − strength · congestion)
//!             · (0.8 + 0.2 · (length − 80) / 320)
//! ```
//!
//! in m/s and standard deviation `0.12 · mean + 0.8`; `region` and
//! `congestion` lie in (0, 1).

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::argcn::Targets;
use crate::error::{Error, Result};
use crate::graph::{
    build_line_graph, bucketize, FeatureColumn, FeatureKind, RoadNetwork, Segment, SpeedHistogram, DEFAULT_BUCKETS,
    DEFAULT_BUCKET_WIDTH,
};
use crate::seed::Seed;

/// Name of the speed-limit feature column (km/h).
pub const SPEED_LIMIT: &str = "speed_limit";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Intersections per grid column.
    pub rows: usize,
    /// Intersections per grid row.
    pub cols: usize,
    /// Probability that a grid line is an arterial road.
    pub highway_fraction: f64,
    /// Speed limits in km/h, split into thirds for local, collector and
    /// arterial roads.
    pub palette: Vec<f64>,
    /// Each labeled segment gets between this many and twice this many
    /// observations.
    pub observations: usize,
    pub min_observations: usize,
    /// Standard deviation, in grid cells, of the kernel smoothing the
    /// congestion field.
    pub correlation_length: f64,
    /// Largest relative slowdown caused by congestion.
    pub congestion_strength: f64,
    /// Standard deviation of the noise on the congestion feature.
    pub congestion_noise: f64,
    /// Largest relative speed-up or slow-down from the regional profile.
    pub regional_spread: f64,
    /// Smoothing kernel width, in grid cells, of the regional profile.
    pub regional_length: f64,
    pub labeled_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 23,
            cols: 23,
            highway_fraction: 0.2,
            palette: vec![30.0, 50.0, 60.0, 80.0, 90.0, 110.0, 130.0],
            observations: 60,
            min_observations: 50,
            correlation_length: 2.5,
            congestion_strength: 0.5,
            congestion_noise: 0.25,
            regional_spread: 0.0,
            regional_length: 3.0,
            labeled_fraction: 0.7,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Square grid with `n × n` intersections: `4n(n − 1)` segments.
    pub fn grid(n: usize, seed: u64) -> Self {
        SynthConfig {
            rows: n,
            cols: n,
            seed,
            ..SynthConfig::default()
        }
    }

    pub fn segment_count(&self) -> usize {
        2 * (self.rows * self.cols.saturating_sub(1) + self.cols * self.rows.saturating_sub(1))
    }

    fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::Argument(format!(
                "grid {}×{} is degenerate; both sides need 2 intersections",
                self.rows, self.cols
            )));
        }
        for (name, v) in [
            ("highway_fraction", self.highway_fraction),
            ("labeled_fraction", self.labeled_fraction),
            ("congestion_strength", self.congestion_strength),
            ("regional_spread", self.regional_spread),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let top = DEFAULT_BUCKETS as f64 * DEFAULT_BUCKET_WIDTH * 3.6;
        if self.palette.is_empty() || self.palette.iter().any(|&l| !(l > 0.0 && l <= top)) {
            return Err(Error::Argument(format!("speed limits must lie in (0, {top}] km/h")));
        }
        if self.observations < self.min_observations {
            return Err(Error::Config(format!(
                "{} observations per segment is below the threshold of {}",
                self.observations, self.min_observations
            )));
        }
        if !(self.correlation_length > 0.0) || !(self.regional_length > 0.0) || !(self.congestion_noise >= 0.0) {
            return Err(Error::Argument("field lengths and noise must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub network: RoadNetwork,
    /// Observed speeds (m/s) of labeled segments, by segment id.
    pub observations: BTreeMap<u64, Vec<f64>>,
    /// Mean of each segment's untruncated speed distribution, m/s, in
    /// segment order.
    pub true_mean: Vec<f64>,
    pub dataset: LabeledDataset,
}

fn tier(palette: &[f64], category: usize) -> &[f64] {
    let n = palette.len();
    let lo = (category * n / 3).min(n - 1);
    let hi = ((category + 1) * n / 3).clamp(lo + 1, n);
    &palette[lo..hi]
}

/// Gaussian-smoothed white noise, standardized and squashed into (0, 1).
fn smooth_field(rows: usize, cols: usize, sigma: f64, rng: &mut impl Rng) -> Array2<f64> {
    let white = Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let radius = (3.0 * sigma).ceil() as isize;
    let smooth = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let mut acc = 0.0;
        for dr in -radius..=radius {
            for dc in -radius..=radius {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                    continue;
                }
                let w = (-((dr * dr + dc * dc) as f64) / (2.0 * sigma * sigma)).exp();
                acc += w * white[[rr as usize, cc as usize]];
            }
        }
        acc
    });
    let n = smooth.len() as f64;
    let mean = smooth.sum() / n;
    let std = (smooth.mapv(|v| (v - mean).powi(2)).sum() / n).sqrt().max(1e-12);
    smooth.mapv(|v| 1.0 / (1.0 + (-1.5 * (v - mean) / std).exp()))
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticData> {
    config.validate()?;
    let seed = Seed(config.seed);
    let (rows, cols) = (config.rows, config.cols);
    let mut palette = config.palette.clone();
    palette.sort_by(f64::total_cmp);
    palette.dedup();

    // Road category and speed limit per grid line: rows first, then columns.
    let mut line_rng = seed.named("roads").rng();
    let lines: Vec<(usize, f64)> = (0..rows + cols)
        .map(|_| {
            let category = if line_rng.random_bool(config.highway_fraction) {
                2
            } else if line_rng.random_bool(0.35) {
                1
            } else {
                0
            };
            let limit = *tier(&palette, category).choose(&mut line_rng).expect("tiers are non-empty");
            (category, limit)
        })
        .collect();
    let field = smooth_field(rows, cols, config.correlation_length, &mut seed.named("congestion").rng());
    let region = smooth_field(rows, cols, config.regional_length, &mut seed.named("region").rng());

    let schema = vec![
        FeatureColumn::new(SPEED_LIMIT, FeatureKind::Categorical),
        FeatureColumn::new("road_category", FeatureKind::Categorical),
        FeatureColumn::new("length_m", FeatureKind::Continuous),
        FeatureColumn::new("congestion", FeatureKind::Continuous),
    ];
    let mut network = RoadNetwork::new(schema);
    let node = |r: usize, c: usize| (r * cols + c) as u64;
    for r in 0..rows {
        for c in 0..cols {
            network.add_intersection(node(r, c));
        }
    }
    let mut seg_rng = seed.named("segments").rng();
    let noise = Normal::new(0.0, config.congestion_noise).expect("validated noise");
    let mut true_mean = Vec::new();
    let mut add_pair = |a: (usize, usize), b: (usize, usize), line: usize, net: &mut RoadNetwork| {
        let (category, limit) = lines[line];
        let congestion = 0.5 * (field[a] + field[b]);
        let profile = 1.0 + config.regional_spread * (region[a] + region[b] - 1.0);
        for (from, to) in [(a, b), (b, a)] {
            let id = net.segments.len() as u64;
            let length: f64 = seg_rng.random_range(80.0..400.0);
            let observed_congestion = congestion + noise.sample(&mut seg_rng);
            let mean = limit / 3.6
                * profile
                * (1.0 - config.congestion_strength * congestion)
                * (0.8 + 0.2 * (length - 80.0) / 320.0);
            true_mean.push(mean.max(2.0));
            net.add_segment(Segment {
                id,
                from: node(from.0, from.1),
                to: node(to.0, to.1),
                oneway: true,
                features: vec![limit, category as f64, length.round(), observed_congestion],
            });
        }
        let n = net.segments.len() as u64;
        net.ban_turn(n - 2, n - 1);
        net.ban_turn(n - 1, n - 2);
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                add_pair((r, c), (r, c + 1), r, &mut network);
            }
            if r + 1 < rows {
                add_pair((r, c), (r + 1, c), rows + c, &mut network);
            }
        }
    }

    let top = DEFAULT_BUCKETS as f64 * DEFAULT_BUCKET_WIDTH;
    let mut obs_rng = seed.named("observations").rng();
    let mut observations = BTreeMap::new();
    for (s, &mean) in network.segments.iter().zip(&true_mean) {
        if !obs_rng.random_bool(config.labeled_fraction) {
            continue;
        }
        let dist = Normal::new(mean, 0.12 * mean + 0.8).expect("positive spread");
        let count = obs_rng.random_range(config.observations..=2 * config.observations);
        let speeds: Vec<f64> = (0..count)
            .map(|_| loop {
                let v: f64 = dist.sample(&mut obs_rng);
                if (0.0..top).contains(&v) {
                    break (v * 100.0).round() / 100.0;
                }
            })
            .collect();
        observations.insert(s.id, speeds);
    }

    let mut labels = BTreeMap::new();
    for (&id, speeds) in &observations {
        labels.insert(id, bucketize(speeds, DEFAULT_BUCKETS, DEFAULT_BUCKET_WIDTH)?);
    }
    let dataset = road_dataset(&network, &labels)?;
    Ok(SyntheticData {
        network,
        observations,
        true_mean,
        dataset,
    })
}

/// Line graph of `network` with the given histograms as labels.
pub fn road_dataset(network: &RoadNetwork, labels: &BTreeMap<u64, SpeedHistogram>) -> Result<LabeledDataset> {
    let graph = build_line_graph(network)?;
    let k = labels.values().next().map_or(DEFAULT_BUCKETS, SpeedHistogram::len);
    let index = graph.index_of();
    let mut targets = Array2::zeros((graph.node_count(), k));
    let mut labeled = Vec::with_capacity(labels.len());
    for (id, h) in labels {
        let &v = index
            .get(id)
            .ok_or_else(|| Error::Structural(format!("label for unknown segment {id}")))?;
        if h.len() != k {
            return Err(Error::Structural(format!(
                "segment {id} has {} buckets, expected {k}",
                h.len()
            )));
        }
        targets.row_mut(v).assign(&ndarray::ArrayView1::from(h.buckets()));
        labeled.push(v);
    }
    LabeledDataset::new(graph, Targets::Histograms(targets), labeled, None)
}
