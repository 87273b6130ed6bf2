//! Histogram-comparison and classification metrics, and aggregation over
//! repeated runs.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing added to the predicted bucket in the KL denominator.
pub const KL_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistMetrics {
    pub intersection: f64,
    pub correlation: f64,
    pub bhattacharyya: f64,
    pub kl_divergence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClsMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub roc_auc: f64,
}

/// Compares a true histogram `truth` with a prediction `pred`.
///
/// - intersection: `Σ min(tᵢ, pᵢ)`
/// - correlation: Pearson over bucket values; when either side has zero
///   variance it is 1 if the histograms are equal and 0 otherwise
/// - bhattacharyya: `sqrt(1 − Σ sqrt(tᵢ·pᵢ))`, computed for normalized
///   inputs as `sqrt(½ Σ (sqrt tᵢ − sqrt pᵢ)²)`, which avoids the
///   cancellation near identical histograms
/// - kl_divergence: `Σ_{tᵢ>0} tᵢ ln(tᵢ / (pᵢ + ε))`, natural log
pub fn hist_metrics(truth: &[f64], pred: &[f64]) -> Result<HistMetrics> {
    if truth.len() != pred.len() {
        return Err(Error::Argument(format!(
            "histograms have {} and {} buckets",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Argument("empty histograms".into()));
    }
    let intersection: f64 = truth.iter().zip(pred).map(|(t, p)| t.min(*p)).sum();
    let hellinger: f64 = truth.iter().zip(pred).map(|(t, p)| (t.sqrt() - p.sqrt()).powi(2)).sum();
    let kl_divergence: f64 = truth
        .iter()
        .zip(pred)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, p)| t * (t / (p + KL_EPSILON)).ln())
        .sum();
    Ok(HistMetrics {
        intersection,
        correlation: pearson(truth, pred),
        bhattacharyya: (0.5 * hellinger).sqrt().min(1.0),
        // Rounding can push an exact match a hair below zero.
        kl_divergence: kl_divergence.max(0.0),
    })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (cov / (va * vb).sqrt()).clamp(-1.0, 1.0)
}

/// Mean of [`hist_metrics`] over paired rows.
pub fn mean_hist_metrics(truth: ArrayView2<'_, f64>, pred: ArrayView2<'_, f64>) -> Result<HistMetrics> {
    if truth.dim() != pred.dim() {
        return Err(Error::Argument(format!(
            "{:?} truth rows vs {:?} predictions",
            truth.dim(),
            pred.dim()
        )));
    }
    if truth.nrows() == 0 {
        return Err(Error::Argument("no rows to evaluate".into()));
    }
    let mut sum = [0.0; 4];
    for (t, p) in truth.rows().into_iter().zip(pred.rows()) {
        let m = hist_metrics(&t.to_vec(), &p.to_vec())?;
        for (s, v) in sum.iter_mut().zip([m.intersection, m.correlation, m.bhattacharyya, m.kl_divergence]) {
            *s += v;
        }
    }
    let n = truth.nrows() as f64;
    Ok(HistMetrics {
        intersection: sum[0] / n,
        correlation: sum[1] / n,
        bhattacharyya: sum[2] / n,
        kl_divergence: sum[3] / n,
    })
}

fn argmax(row: &[f64]) -> usize {
    // First maximum wins.
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Accuracy of the arg-max class, macro-F1 over the classes that occur in
/// the labels or the predictions (a class never predicted scores 0), and
/// macro one-vs-rest ROC AUC over the classes that have both positive and
/// negative samples.
pub fn cls_metrics(probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<ClsMetrics> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::Argument("no samples to evaluate".into()));
    }
    if probs.nrows() != n {
        return Err(Error::Argument(format!("{} prediction rows for {n} labels", probs.nrows())));
    }
    let c = probs.ncols();
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Argument(format!("label {bad} outside {c} classes")));
    }
    let predicted: Vec<usize> = probs.rows().into_iter().map(|r| argmax(&r.to_vec())).collect();
    let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();

    let mut tp = vec![0usize; c];
    let mut fp = vec![0usize; c];
    let mut fn_ = vec![0usize; c];
    for (&p, &l) in predicted.iter().zip(labels) {
        if p == l {
            tp[l] += 1;
        } else {
            fp[p] += 1;
            fn_[l] += 1;
        }
    }
    let present: Vec<usize> = (0..c).filter(|&k| tp[k] + fp[k] + fn_[k] > 0).collect();
    let macro_f1 = present
        .iter()
        .map(|&k| 2.0 * tp[k] as f64 / (2 * tp[k] + fp[k] + fn_[k]) as f64)
        .sum::<f64>()
        / present.len() as f64;

    let aucs: Vec<f64> = (0..c)
        .filter_map(|k| {
            let scores: Vec<(f64, bool)> = probs
                .column(k)
                .iter()
                .zip(labels)
                .map(|(&s, &l)| (s, l == k))
                .collect();
            binary_auc(scores)
        })
        .collect();
    if aucs.is_empty() {
        return Err(Error::InsufficientData(
            "ROC AUC needs a class with both positive and negative samples".into(),
        ));
    }
    Ok(ClsMetrics {
        accuracy: correct as f64 / n as f64,
        macro_f1,
        roc_auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
    })
}

/// Trapezoidal area under the ROC curve traced by sweeping the threshold
/// over every distinct score. `None` without both classes.
fn binary_auc(mut scores: Vec<(f64, bool)>) -> Option<f64> {
    let pos = scores.iter().filter(|s| s.1).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    scores.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < scores.len() {
        // Samples with equal scores cross the threshold together.
        let score = scores[i].0;
        while i < scores.len() && scores[i].0 == score {
            if scores[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / pos as f64;
        let fpr = fp as f64 / neg as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Some(area)
}

/// Mean, median and standard error of the mean of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation over `sqrt(n)`; 0 for a single run.
    pub sem: f64,
}

pub fn aggregate(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Argument("nothing to aggregate".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let sem = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary { mean, median, sem })
}
