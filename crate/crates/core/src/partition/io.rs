//! Partition assignments as CSV: `segment_id,cluster`.

use std::path::Path;

use super::PartitionSet;
use crate::error::{Error, Result};
use crate::graph::LineGraph;

pub fn write_assignment(path: impl AsRef<Path>, g: &LineGraph, p: &PartitionSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["segment_id", "cluster"])
        .map_err(|e| Error::csv(path, e))?;
    for (id, c) in g.node_ids().iter().zip(p.assignment()) {
        w.write_record([id.to_string(), c.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an assignment for `g`. Every node must appear exactly once; the
/// cluster count is one more than the largest id.
pub fn read_assignment(path: impl AsRef<Path>, g: &LineGraph) -> Result<PartitionSet> {
    let path = path.as_ref();
    let index = g.index_of();
    let mut assignment: Vec<Option<usize>> = vec![None; g.node_count()];
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::csv(path, e))?;
        if record.len() != 2 {
            return Err(Error::parse(path, line, "expected segment_id,cluster"));
        }
        let id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, "invalid segment id"))?;
        let cluster: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, "invalid cluster id"))?;
        let &v = index
            .get(&id)
            .ok_or_else(|| Error::parse(path, line, format!("unknown segment {id}")))?;
        if assignment[v].replace(cluster).is_some() {
            return Err(Error::parse(path, line, format!("segment {id} assigned twice")));
        }
    }
    let assignment: Vec<usize> = assignment
        .into_iter()
        .enumerate()
        .map(|(v, c)| {
            c.ok_or_else(|| {
                Error::parse(path, 0, format!("segment {} has no cluster", g.node_ids()[v]))
            })
        })
        .collect::<Result<_>>()?;
    let s = assignment.iter().max().map_or(0, |&m| m + 1);
    PartitionSet::from_assignment(assignment, s)
}
