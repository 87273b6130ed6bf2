//! CSV formats for road networks and speed observations.
//!
//! `segments.csv` has the header
//! `segment_id,from,to,oneway,<feature columns...>`. Feature column names
//! carry their kind as a prefix: `cat:` for categorical, `num:` for
//! continuous. `observations.csv` has the header `segment_id,speed_mps`
//! with one row per observed traversal. `turns.csv` has the header
//! `from_segment,to_segment` and lists banned turns.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use super::{FeatureColumn, FeatureKind, RoadNetwork, Segment};
use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 4] = ["segment_id", "from", "to", "oneway"];

fn column_header(col: &FeatureColumn) -> String {
    match col.kind {
        FeatureKind::Categorical => format!("cat:{}", col.name),
        FeatureKind::Continuous => format!("num:{}", col.name),
    }
}

fn parse_column_header(h: &str) -> FeatureColumn {
    if let Some(name) = h.strip_prefix("cat:") {
        FeatureColumn::new(name, FeatureKind::Categorical)
    } else if let Some(name) = h.strip_prefix("num:") {
        FeatureColumn::new(name, FeatureKind::Continuous)
    } else {
        FeatureColumn::new(h, FeatureKind::Continuous)
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} {field:?}")))
}

fn parse_bool(path: &Path, line: usize, field: &str) -> Result<bool> {
    match field.trim() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(Error::parse(path, line, format!("invalid oneway flag {other:?}"))),
    }
}

pub fn read_network(path: impl AsRef<Path>) -> Result<RoadNetwork> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.len() < FIXED_COLUMNS.len()
        || headers.iter().zip(FIXED_COLUMNS).any(|(h, want)| h.trim() != want)
    {
        return Err(Error::parse(
            path,
            1,
            format!("header must start with {}", FIXED_COLUMNS.join(",")),
        ));
    }
    let schema: Vec<FeatureColumn> = headers
        .iter()
        .skip(FIXED_COLUMNS.len())
        .map(parse_column_header)
        .collect();

    let mut net = RoadNetwork::new(schema);
    let mut seen = HashSet::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::csv(path, e))?;
        if record.len() != headers.len() {
            return Err(Error::parse(path, line, "wrong number of fields"));
        }
        let segment = Segment {
            id: parse_field(path, line, &record[0], "segment id")?,
            from: parse_field(path, line, &record[1], "intersection id")?,
            to: parse_field(path, line, &record[2], "intersection id")?,
            oneway: parse_bool(path, line, &record[3])?,
            features: record
                .iter()
                .skip(FIXED_COLUMNS.len())
                .map(|f| parse_field(path, line, f, "feature value"))
                .collect::<Result<_>>()?,
        };
        for end in [segment.from, segment.to] {
            if seen.insert(end) {
                net.add_intersection(end);
            }
        }
        net.add_segment(segment);
    }
    Ok(net)
}

pub fn write_network(net: &RoadNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(net.schema.iter().map(column_header))
        .collect();
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for s in &net.segments {
        let mut row = vec![
            s.id.to_string(),
            s.from.to_string(),
            s.to.to_string(),
            if s.oneway { "1".into() } else { "0".into() },
        ];
        row.extend(s.features.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Observations grouped by segment id.
pub fn read_observations(path: impl AsRef<Path>) -> Result<BTreeMap<u64, Vec<f64>>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?;
    if headers.len() != 2 || &headers[0] != "segment_id" || &headers[1] != "speed_mps" {
        return Err(Error::parse(path, 1, "header must be segment_id,speed_mps"));
    }
    let mut out: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::csv(path, e))?;
        let id: u64 = parse_field(path, line, &record[0], "segment id")?;
        let speed: f64 = parse_field(path, line, &record[1], "speed")?;
        out.entry(id).or_default().push(speed);
    }
    Ok(out)
}

pub fn write_observations<'a>(
    path: impl AsRef<Path>,
    observations: impl IntoIterator<Item = (u64, &'a [f64])>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["segment_id", "speed_mps"])
        .map_err(|e| Error::csv(path, e))?;
    for (id, speeds) in observations {
        for s in speeds {
            w.write_record([id.to_string(), s.to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Adds the banned turns listed in `path` to `net`.
pub fn read_banned_turns(path: impl AsRef<Path>, net: &mut RoadNetwork) -> Result<()> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?;
    if headers.len() != 2 || &headers[0] != "from_segment" || &headers[1] != "to_segment" {
        return Err(Error::parse(path, 1, "header must be from_segment,to_segment"));
    }
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::csv(path, e))?;
        let a: u64 = parse_field(path, line, &record[0], "segment id")?;
        let b: u64 = parse_field(path, line, &record[1], "segment id")?;
        net.ban_turn(a, b);
    }
    Ok(())
}

pub fn write_banned_turns(net: &RoadNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["from_segment", "to_segment"])
        .map_err(|e| Error::csv(path, e))?;
    for (a, b) in &net.banned_turns {
        w.write_record([a.to_string(), b.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_line_graph;

    #[test]
    fn network_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut net = RoadNetwork::new(vec![
            FeatureColumn::new("speed_limit", FeatureKind::Categorical),
            FeatureColumn::new("length_m", FeatureKind::Continuous),
        ]);
        net.add_intersection(1);
        net.add_intersection(2);
        net.add_segment(Segment {
            id: 7,
            from: 1,
            to: 2,
            oneway: false,
            features: vec![50.0, 123.25],
        });
        let path = dir.path().join("segments.csv");
        write_network(&net, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("segment_id,from,to,oneway,cat:speed_limit,num:length_m\n"));
        let back = read_network(&path).unwrap();
        assert_eq!(back.segments, net.segments);
        assert_eq!(back.schema, net.schema);
        assert_eq!(build_line_graph(&back).unwrap().node_count(), 1);
    }

    #[test]
    fn observations_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("observations.csv");
        let a = [10.0, 12.5];
        let b = [3.0];
        write_observations(&path, [(1u64, &a[..]), (2, &b[..])]).unwrap();
        let back = read_observations(&path).unwrap();
        assert_eq!(back[&1], vec![10.0, 12.5]);
        assert_eq!(back[&2], vec![3.0]);

        std::fs::write(&path, "segment_id,speed_mps\n1,fast\n").unwrap();
        let err = read_observations(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn banned_turns_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("turns.csv");
        let mut net = RoadNetwork::new(Vec::new());
        net.ban_turn(3, 4);
        net.ban_turn(1, 2);
        write_banned_turns(&net, &path).unwrap();
        let mut back = RoadNetwork::new(Vec::new());
        read_banned_turns(&path, &mut back).unwrap();
        assert_eq!(back.banned_turns, net.banned_turns);

        std::fs::write(&path, "from_segment,to_segment\n1,x\n").unwrap();
        assert!(matches!(read_banned_turns(&path, &mut back), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn bad_header_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("segments.csv");
        std::fs::write(&path, "id,a,b\n1,2,3\n").unwrap();
        assert!(matches!(read_network(&path), Err(Error::Parse { .. })));
    }
}
