use std::collections::{BTreeSet, HashMap, HashSet};

use ndarray::Array2;

use super::line_graph::{FeatureColumn, LineGraph};
use crate::error::{Error, Result};

/// A directed (or two-way) road segment between two intersections.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: u64,
    pub from: u64,
    pub to: u64,
    /// One-way segments are entered at `from` and left at `to`; two-way
    /// segments may be traversed in either direction.
    pub oneway: bool,
    /// Raw feature values, one per schema column. Categorical values are
    /// stored as their numeric code (e.g. a speed limit in km/h).
    pub features: Vec<f64>,
}

impl Segment {
    fn entries(&self) -> impl Iterator<Item = u64> + '_ {
        let back = (!self.oneway && self.to != self.from).then_some(self.to);
        std::iter::once(self.from).chain(back)
    }

    fn exits(&self) -> impl Iterator<Item = u64> + '_ {
        let back = (!self.oneway && self.to != self.from).then_some(self.from);
        std::iter::once(self.to).chain(back)
    }
}

/// Intersection graph: intersections joined by road segments.
#[derive(Debug, Clone, Default)]
pub struct RoadNetwork {
    pub intersections: Vec<u64>,
    pub segments: Vec<Segment>,
    pub schema: Vec<FeatureColumn>,
    /// Prohibited `(from_segment, to_segment)` transitions.
    pub banned_turns: BTreeSet<(u64, u64)>,
}

impl RoadNetwork {
    pub fn new(schema: Vec<FeatureColumn>) -> Self {
        RoadNetwork {
            schema,
            ..Default::default()
        }
    }

    pub fn add_intersection(&mut self, id: u64) {
        self.intersections.push(id);
    }

    pub fn add_segment(&mut self, segment: Segment) {
        self.segments.push(segment);
    }

    pub fn ban_turn(&mut self, from_segment: u64, to_segment: u64) {
        self.banned_turns.insert((from_segment, to_segment));
    }

    fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Argument("road network has no segments".into()));
        }
        let known: HashSet<u64> = self.intersections.iter().copied().collect();
        let mut seen = HashSet::with_capacity(self.segments.len());
        for s in &self.segments {
            if !seen.insert(s.id) {
                return Err(Error::Structural(format!("duplicate segment id {}", s.id)));
            }
            for end in [s.from, s.to] {
                if !known.contains(&end) {
                    return Err(Error::Structural(format!(
                        "segment {} references unknown intersection {end}",
                        s.id
                    )));
                }
            }
            if s.features.len() != self.schema.len() {
                return Err(Error::Structural(format!(
                    "segment {} has {} feature values, schema has {} columns",
                    s.id,
                    s.features.len(),
                    self.schema.len()
                )));
            }
        }
        Ok(())
    }
}

/// Builds the line graph: one node per segment, and an edge `(i, j)` whenever
/// a vehicle leaving segment `i` at an intersection may enter segment `j`
/// there, unless the turn is banned.
pub fn build_line_graph(network: &RoadNetwork) -> Result<LineGraph> {
    network.validate()?;

    let mut entering: HashMap<u64, Vec<usize>> = HashMap::new();
    for (j, s) in network.segments.iter().enumerate() {
        for x in s.entries() {
            entering.entry(x).or_default().push(j);
        }
    }

    let mut edges = Vec::new();
    for (i, s) in network.segments.iter().enumerate() {
        let mut targets: Vec<usize> = s
            .exits()
            .flat_map(|x| entering.get(&x).into_iter().flatten().copied())
            .filter(|&j| j != i)
            .filter(|&j| {
                !network
                    .banned_turns
                    .contains(&(s.id, network.segments[j].id))
            })
            .collect();
        targets.sort_unstable();
        targets.dedup();
        edges.extend(targets.into_iter().map(|j| (i, j)));
    }

    let node_ids = network.segments.iter().map(|s| s.id).collect();
    let mut raw = Array2::zeros((network.segments.len(), network.schema.len()));
    for (i, s) in network.segments.iter().enumerate() {
        for (c, &v) in s.features.iter().enumerate() {
            raw[[i, c]] = v;
        }
    }
    LineGraph::new(node_ids, edges, network.schema.clone(), raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FeatureKind;
    use proptest::prelude::*;

    fn seg(id: u64, from: u64, to: u64) -> Segment {
        Segment {
            id,
            from,
            to,
            oneway: true,
            features: vec![50.0],
        }
    }

    fn network(n_intersections: u64, segments: Vec<Segment>) -> RoadNetwork {
        let mut net = RoadNetwork::new(vec![FeatureColumn::new("speed_limit", FeatureKind::Categorical)]);
        for i in 0..n_intersections {
            net.add_intersection(i);
        }
        for s in segments {
            net.add_segment(s);
        }
        net
    }

    #[test]
    fn single_segment_has_no_edges() {
        let g = build_line_graph(&network(2, vec![seg(1, 0, 1)])).unwrap();
        assert_eq!(g.node_count(), 1);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn chain_of_two() {
        let g = build_line_graph(&network(3, vec![seg(1, 0, 1), seg(2, 1, 2)])).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn directed_ring_is_a_cycle() {
        let net = network(4, (0..4).map(|i| seg(i, i, (i + 1) % 4)).collect());
        let g = build_line_graph(&net).unwrap();
        assert_eq!(g.node_count(), 4);
        // Brute force over all ordered pairs.
        let mut expected = Vec::new();
        for (i, a) in net.segments.iter().enumerate() {
            for (j, b) in net.segments.iter().enumerate() {
                if i != j && a.to == b.from {
                    expected.push((i, j));
                }
            }
        }
        assert_eq!(g.edges(), expected.as_slice());
        assert_eq!(expected, vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
    }

    #[test]
    fn two_way_segments_connect_both_ends() {
        let mut a = seg(1, 0, 1);
        a.oneway = false;
        let mut b = seg(2, 2, 1);
        b.oneway = false;
        let g = build_line_graph(&network(3, vec![a, b])).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
    }

    #[test]
    fn banned_turn_removes_edge() {
        let mut net = network(3, vec![seg(1, 0, 1), seg(2, 1, 2), seg(3, 1, 0)]);
        net.ban_turn(1, 3);
        let g = build_line_graph(&net).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (2, 0)]);
    }

    #[test]
    fn dangling_reference_is_structural() {
        let err = build_line_graph(&network(2, vec![seg(1, 0, 9)])).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
        let err = build_line_graph(&network(2, vec![seg(1, 0, 1), seg(1, 1, 0)])).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }

    #[test]
    fn empty_network_rejected() {
        assert!(build_line_graph(&network(2, vec![])).is_err());
    }

    proptest! {
        #[test]
        fn edge_count_matches_brute_force(
            n_int in 2u64..30,
            raw in prop::collection::vec((0u64..1000, 0u64..1000), 1..200),
        ) {
            let segments: Vec<Segment> = raw
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| seg(i as u64, a % n_int, b % n_int))
                .collect();
            let net = network(n_int, segments);
            let g = build_line_graph(&net).unwrap();
            let mut brute = 0usize;
            for (i, a) in net.segments.iter().enumerate() {
                for (j, b) in net.segments.iter().enumerate() {
                    if i != j && a.to == b.from {
                        brute += 1;
                    }
                }
            }
            prop_assert_eq!(g.edges().len(), brute);
        }
    }
}
