use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BUCKETS: usize = 22;
pub const DEFAULT_BUCKET_WIDTH: f64 = 2.0;

/// Normalized distribution of travel speeds; bucket `i` covers
/// `[i * width, (i + 1) * width)` m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedHistogram {
    buckets: Vec<f64>,
    bucket_width: f64,
}

impl SpeedHistogram {
    /// Wraps already-normalized bucket proportions.
    pub fn new(buckets: Vec<f64>, bucket_width: f64) -> Result<Self> {
        if buckets.is_empty() {
            return Err(Error::Argument("histogram needs at least one bucket".into()));
        }
        if !(bucket_width > 0.0 && bucket_width.is_finite()) {
            return Err(Error::Argument(format!("bucket width {bucket_width} must be positive")));
        }
        if buckets.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(Error::Argument("histogram buckets must be finite and non-negative".into()));
        }
        let total: f64 = buckets.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("histogram sums to {total}, expected 1")));
        }
        Ok(SpeedHistogram {
            buckets,
            bucket_width,
        })
    }

    pub fn buckets(&self) -> &[f64] {
        &self.buckets
    }

    pub fn bucket_width(&self) -> f64 {
        self.bucket_width
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Mean speed, placing each bucket's mass at its midpoint.
    pub fn mean_speed(&self) -> f64 {
        self.buckets
            .iter()
            .enumerate()
            .map(|(i, &b)| b * (i as f64 + 0.5) * self.bucket_width)
            .sum()
    }

    pub fn into_buckets(self) -> Vec<f64> {
        self.buckets
    }
}

/// Counts speeds into `k` buckets of `width` m/s and normalizes by the number
/// of retained observations.
///
/// Speeds at or above `k * width`, negative speeds and non-finite values are
/// discarded rather than clamped into the edge buckets.
pub fn bucketize(observations: &[f64], k: usize, width: f64) -> Result<SpeedHistogram> {
    if k == 0 {
        return Err(Error::Argument("bucket count must be positive".into()));
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Argument(format!("bucket width {width} must be positive")));
    }
    let mut counts = vec![0usize; k];
    let mut retained = 0usize;
    for &speed in observations {
        if !speed.is_finite() || speed < 0.0 {
            continue;
        }
        let bucket = (speed / width).floor() as usize;
        if bucket >= k {
            continue;
        }
        counts[bucket] += 1;
        retained += 1;
    }
    if retained == 0 {
        return Err(Error::InsufficientData(format!(
            "no observations below {} m/s out of {}",
            k as f64 * width,
            observations.len()
        )));
    }
    let buckets = counts
        .into_iter()
        .map(|c| c as f64 / retained as f64)
        .collect();
    Ok(SpeedHistogram {
        buckets,
        bucket_width: width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_speeds_same_bucket() {
        let h = bucketize(&[10.0, 10.5], 22, 2.0).unwrap();
        for (i, &b) in h.buckets().iter().enumerate() {
            assert_eq!(b, if i == 5 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn top_bucket_holds_42_to_44() {
        let h = bucketize(&[43.0], 22, 2.0).unwrap();
        assert_eq!(h.buckets()[21], 1.0);
        assert_eq!(h.buckets().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn overflow_is_discarded() {
        let h = bucketize(&[1.0, 3.0, 3.9, 50.0], 22, 2.0).unwrap();
        assert!((h.buckets()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((h.buckets()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(h.buckets()[2..].iter().all(|&b| b == 0.0));
        // 44.0 is the first excluded speed.
        let h = bucketize(&[44.0, 43.999], 22, 2.0).unwrap();
        assert_eq!(h.buckets()[21], 1.0);
    }

    #[test]
    fn empty_or_filtered_is_insufficient() {
        assert!(matches!(bucketize(&[], 22, 2.0), Err(Error::InsufficientData(_))));
        assert!(matches!(
            bucketize(&[50.0, -1.0, f64::NAN], 22, 2.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn constructor_validates() {
        assert!(SpeedHistogram::new(vec![0.5, 0.5], 2.0).is_ok());
        assert!(SpeedHistogram::new(vec![0.5, 0.4], 2.0).is_err());
        assert!(SpeedHistogram::new(vec![1.5, -0.5], 2.0).is_err());
    }

    proptest! {
        #[test]
        fn histograms_are_normalized(obs in prop::collection::vec(0.0f64..60.0, 1..300)) {
            match bucketize(&obs, 22, 2.0) {
                Ok(h) => {
                    let total: f64 = h.buckets().iter().sum();
                    prop_assert!((total - 1.0).abs() <= 1e-9);
                    prop_assert!(h.buckets().iter().all(|&b| b >= 0.0));
                }
                Err(Error::InsufficientData(_)) => prop_assert!(obs.iter().all(|&s| s >= 44.0)),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
