//! `labels.csv`: `segment_id,b_0,…,b_{k-1}`, one labeled segment per row.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{SpeedHistogram, DEFAULT_BUCKET_WIDTH};

pub fn write_labels(path: impl AsRef<Path>, labels: &BTreeMap<u64, SpeedHistogram>) -> Result<()> {
    let path = path.as_ref();
    let k = labels.values().next().map_or(0, SpeedHistogram::len);
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["segment_id".to_string()];
    header.extend((0..k).map(|i| format!("b_{i}")));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for (id, h) in labels {
        if h.len() != k {
            return Err(Error::Argument(format!("segment {id} has {} buckets, expected {k}", h.len())));
        }
        let mut rec = vec![id.to_string()];
        rec.extend(h.buckets().iter().map(|b| b.to_string()));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Histograms are assumed to use the default bucket width.
pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<u64, SpeedHistogram>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let k = header.len().saturating_sub(1);
    if k == 0
        || &header[0] != "segment_id"
        || header.iter().skip(1).enumerate().any(|(i, h)| h != format!("b_{i}"))
    {
        return Err(Error::parse(path, 1, "header must be segment_id,b_0,…,b_{k-1}"));
    }
    let mut out = BTreeMap::new();
    for (n, rec) in r.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let id: u64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid segment id {:?}", &rec[0])))?;
        let buckets = rec
            .iter()
            .skip(1)
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("invalid bucket value {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let h = SpeedHistogram::new(buckets, DEFAULT_BUCKET_WIDTH).map_err(|e| Error::parse(path, line, e.to_string()))?;
        if out.insert(id, h).is_some() {
            return Err(Error::parse(path, line, format!("segment {id} labeled twice")));
        }
    }
    Ok(out)
}
