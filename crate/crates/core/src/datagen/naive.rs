use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

fn mean_of(hists: ArrayView2<'_, f64>, rows: impl Iterator<Item = usize>) -> Option<Array1<f64>> {
    let mut acc = Array1::zeros(hists.ncols());
    let mut n = 0usize;
    for r in rows {
        acc += &hists.row(r);
        n += 1;
    }
    let total = acc.sum();
    (n > 0 && total > 0.0).then(|| acc / total)
}

/// Bucket-wise mean of the histograms in `rows`, renormalized: one
/// histogram predicted for every segment.
pub fn naive_baseline_1(hists: ArrayView2<'_, f64>, rows: &[usize]) -> Result<Array1<f64>> {
    if let Some(&r) = rows.iter().find(|&&r| r >= hists.nrows()) {
        return Err(Error::Argument(format!("row {r} outside {} histograms", hists.nrows())));
    }
    mean_of(hists, rows.iter().copied()).ok_or_else(|| Error::Config("no labeled training nodes".into()))
}

/// Mean histogram per speed limit, falling back to the overall mean for
/// limits never seen in training.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitBaseline {
    pub global: Array1<f64>,
    /// Sorted by limit.
    pub by_limit: Vec<(f64, Array1<f64>)>,
}

impl LimitBaseline {
    pub fn predict(&self, limit: f64) -> ArrayView1<'_, f64> {
        match self.by_limit.binary_search_by(|(l, _)| l.total_cmp(&limit)) {
            Ok(k) => self.by_limit[k].1.view(),
            Err(_) => self.global.view(),
        }
    }

    /// One predicted row per entry of `limits`.
    pub fn predict_all(&self, limits: &[f64]) -> Array2<f64> {
        let mut out = Array2::zeros((limits.len(), self.global.len()));
        for (mut row, &l) in out.rows_mut().into_iter().zip(limits) {
            row.assign(&self.predict(l));
        }
        out
    }
}

/// `limits[v]` is node `v`'s speed limit.
pub fn naive_baseline_2(hists: ArrayView2<'_, f64>, limits: &[f64], rows: &[usize]) -> Result<LimitBaseline> {
    if limits.len() != hists.nrows() {
        return Err(Error::Shape(format!("{} limits for {} histograms", limits.len(), hists.nrows())));
    }
    let global = naive_baseline_1(hists, rows)?;
    let mut distinct: Vec<f64> = rows.iter().map(|&r| limits[r]).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let by_limit = distinct
        .into_iter()
        .map(|l| {
            let group = rows.iter().copied().filter(|&r| limits[r] == l);
            // A group whose histograms are all empty falls back to global.
            let mean = mean_of(hists, group).unwrap_or_else(|| global.clone());
            (l, mean)
        })
        .collect();
    Ok(LimitBaseline { global, by_limit })
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::Rng;

    use super::*;
    use crate::seed::Seed;

    fn random_hists(n: usize, k: usize, seed: u64) -> Array2<f64> {
        let mut rng = Seed(seed).rng();
        let mut h = Array2::from_shape_fn((n, k), |_| rng.random::<f64>());
        for mut row in h.rows_mut() {
            let s = row.sum();
            row /= s;
        }
        h
    }

    #[test]
    fn single_histogram() {
        let h = array![[0.2, 0.8], [0.5, 0.5]];
        assert_eq!(naive_baseline_1(h.view(), &[0]).unwrap(), array![0.2, 0.8]);
    }

    #[test]
    fn opposite_histograms_average() {
        let h = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(naive_baseline_1(h.view(), &[0, 1]).unwrap(), array![0.5, 0.5]);
    }

    #[test]
    fn matches_column_mean() {
        let h = random_hists(100, 22, 1);
        let rows: Vec<usize> = (0..100).collect();
        let got = naive_baseline_1(h.view(), &rows).unwrap();
        for j in 0..22 {
            let brute: f64 = (0..100).map(|i| h[[i, j]]).sum::<f64>() / 100.0;
            assert!((got[j] - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn no_rows_is_a_config_error() {
        let h = array![[1.0]];
        assert!(matches!(naive_baseline_1(h.view(), &[]), Err(Error::Config(_))));
        assert!(matches!(naive_baseline_2(h.view(), &[50.0], &[]), Err(Error::Config(_))));
    }

    #[test]
    fn one_limit_equals_global() {
        let h = random_hists(10, 5, 2);
        let rows: Vec<usize> = (0..10).collect();
        let b = naive_baseline_2(h.view(), &[50.0; 10], &rows).unwrap();
        assert_eq!(b.by_limit.len(), 1);
        assert!((&b.by_limit[0].1 - &b.global).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn grouped_means_and_fallback() {
        let h = random_hists(60, 22, 3);
        let limits: Vec<f64> = (0..60).map(|i| [50.0, 80.0, 110.0][i % 3]).collect();
        let rows: Vec<usize> = (0..45).collect();
        let b = naive_baseline_2(h.view(), &limits, &rows).unwrap();
        assert_eq!(b.by_limit.len(), 3);
        for &(l, ref mean) in &b.by_limit {
            let group: Vec<usize> = rows.iter().copied().filter(|&r| limits[r] == l).collect();
            for j in 0..22 {
                let brute = group.iter().map(|&r| h[[r, j]]).sum::<f64>() / group.len() as f64;
                assert!((mean[j] - brute).abs() < 1e-12);
            }
        }
        assert_ne!(b.predict(50.0), b.predict(80.0));
        assert_eq!(b.predict(30.0), b.global.view());
        let all = b.predict_all(&limits);
        assert_eq!(all.row(3), b.predict(50.0));
    }
}
