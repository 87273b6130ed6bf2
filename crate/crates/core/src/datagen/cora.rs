//! Loader for the Cora citation graph in its published tab-separated form:
//! `cora.content` rows are `paper_id, 0/1 word indicators…, class` and
//! `cora.cites` rows are `cited_id, citing_id`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Split};
use crate::argcn::Targets;
use crate::error::{Error, Result};
use crate::graph::{FeatureColumn, FeatureKind, LineGraph};
use crate::seed::Seed;

/// Class names in label-index order.
pub const CORA_CLASSES: [&str; 7] = [
    "Case_Based",
    "Genetic_Algorithms",
    "Neural_Networks",
    "Probabilistic_Methods",
    "Reinforcement_Learning",
    "Rule_Learning",
    "Theory",
];

/// Random split sizes: `per_class` training nodes of every class, then
/// `validation` and `test` nodes drawn from the rest (`test: None` takes
/// everything left).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoraSplit {
    pub per_class: usize,
    pub validation: usize,
    pub test: Option<usize>,
}

impl Default for CoraSplit {
    /// 20 per class, 500 validation, 1000 test.
    fn default() -> Self {
        CoraSplit {
            per_class: 20,
            validation: 500,
            test: Some(1000),
        }
    }
}

impl CoraSplit {
    /// 20 per class, 30 validation, everything else test.
    pub fn small_validation() -> Self {
        CoraSplit {
            per_class: 20,
            validation: 30,
            test: None,
        }
    }

    fn apply(&self, labels: &[usize], classes: usize, seed: Seed) -> Result<Split> {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut seed.rng());
        let mut taken = vec![0usize; classes];
        let mut split = Split::default();
        let mut rest = Vec::new();
        for v in order {
            if taken[labels[v]] < self.per_class {
                taken[labels[v]] += 1;
                split.train.push(v);
            } else {
                rest.push(v);
            }
        }
        if let Some(c) = taken.iter().position(|&t| t < self.per_class) {
            return Err(Error::InsufficientData(format!(
                "class {} has only {} nodes, {} requested for training",
                CORA_CLASSES.get(c).unwrap_or(&"?"),
                taken[c],
                self.per_class
            )));
        }
        let test = self.test.unwrap_or(rest.len().saturating_sub(self.validation));
        if self.validation + test > rest.len() {
            return Err(Error::InsufficientData(format!(
                "{} validation + {test} test nodes requested, {} available",
                self.validation,
                rest.len()
            )));
        }
        split.validation = rest[..self.validation].to_vec();
        split.test = rest[self.validation..self.validation + test].to_vec();
        for rows in [&mut split.train, &mut split.validation, &mut split.test] {
            rows.sort_unstable();
        }
        Ok(split)
    }
}

/// Reads `cora.content` and `cora.cites` from `dir`.
pub fn load_cora_dir(dir: impl AsRef<Path>, split: &CoraSplit, seed: Seed) -> Result<LabeledDataset> {
    let dir = dir.as_ref();
    load_cora(dir.join("cora.content"), dir.join("cora.cites"), split, seed)
}

/// Citations become edges in both directions; self-citations and repeats
/// are dropped.
pub fn load_cora(
    content: impl AsRef<Path>,
    cites: impl AsRef<Path>,
    split: &CoraSplit,
    seed: Seed,
) -> Result<LabeledDataset> {
    let (content, cites) = (content.as_ref(), cites.as_ref());
    let text = fs::read_to_string(content).map_err(|e| Error::io(content, e))?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut width = None;
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(content, n + 1, "expected id, features and class"));
        }
        let w = fields.len() - 2;
        if *width.get_or_insert(w) != w {
            return Err(Error::parse(content, n + 1, format!("{w} features, earlier rows have {}", width.unwrap())));
        }
        let id: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(content, n + 1, format!("invalid paper id {:?}", fields[0])))?;
        for f in &fields[1..=w] {
            match f.trim() {
                "0" => data.push(0.0),
                "1" => data.push(1.0),
                other => return Err(Error::parse(content, n + 1, format!("feature {other:?} is not 0/1"))),
            }
        }
        let class = fields[w + 1].trim();
        let label = CORA_CLASSES
            .iter()
            .position(|&c| c == class)
            .ok_or_else(|| Error::parse(content, n + 1, format!("unknown class {class:?}")))?;
        ids.push(id);
        labels.push(label);
    }
    let width = width.ok_or_else(|| Error::parse(content, 1, "no papers"))?;
    let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    if index.len() != ids.len() {
        return Err(Error::parse(content, 1, "duplicate paper ids"));
    }

    let text = fs::read_to_string(cites).map_err(|e| Error::io(cites, e))?;
    let mut edges = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let pair: Vec<&str> = line.split_whitespace().collect();
        if pair.len() != 2 {
            return Err(Error::parse(cites, n + 1, "expected two paper ids"));
        }
        let mut ends = [0usize; 2];
        for (end, f) in ends.iter_mut().zip(&pair) {
            let id: u64 = f
                .parse()
                .map_err(|_| Error::parse(cites, n + 1, format!("invalid paper id {f:?}")))?;
            *end = *index
                .get(&id)
                .ok_or_else(|| Error::parse(cites, n + 1, format!("paper {id} not in content file")))?;
        }
        if ends[0] != ends[1] {
            edges.push((ends[0], ends[1]));
            edges.push((ends[1], ends[0]));
        }
    }

    let raw = Array2::from_shape_vec((ids.len(), width), data).expect("rows checked above");
    let schema = (0..width)
        .map(|k| FeatureColumn::new(format!("w{k}"), FeatureKind::Continuous))
        .collect();
    let graph = LineGraph::new(ids, edges, schema, raw)?;
    let split = split.apply(&labels, CORA_CLASSES.len(), seed)?;
    let labeled = (0..labels.len()).collect();
    LabeledDataset::new(
        graph,
        Targets::Classes {
            labels,
            count: CORA_CLASSES.len(),
        },
        labeled,
        Some(split),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 5 papers per class, 4 words each; paper `i` cites `i + 1`.
    fn write_fixture(dir: &Path) {
        let mut content = String::new();
        for i in 0..35u64 {
            let words: Vec<&str> = (0..4).map(|k| if (i + k) % 3 == 0 { "1" } else { "0" }).collect();
            content.push_str(&format!("{}\t{}\t{}\n", 100 + i, words.join("\t"), CORA_CLASSES[(i % 7) as usize]));
        }
        let cites: String = (0..34u64).map(|i| format!("{}\t{}\n", 101 + i, 100 + i)).collect();
        fs::write(dir.join("cora.content"), content).unwrap();
        fs::write(dir.join("cora.cites"), cites + "100\t100\n101\t100\n").unwrap();
    }

    fn split(per_class: usize, validation: usize, test: Option<usize>) -> CoraSplit {
        CoraSplit {
            per_class,
            validation,
            test,
        }
    }

    #[test]
    fn loads_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let d = load_cora_dir(dir.path(), &split(2, 5, Some(10)), Seed(1)).unwrap();
        assert_eq!(d.graph.node_count(), 35);
        // 34 citations, the repeat and the self-citation dropped, both ways.
        assert_eq!(d.graph.edges().len(), 68);
        assert_eq!(d.graph.feature_dim(), 4);
        assert!(d.graph.features().iter().all(|&v| v == 0.0 || v == 1.0));
        let s = d.split.as_ref().unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (14, 5, 10));
        let Targets::Classes { labels, count } = &d.targets else { panic!() };
        assert_eq!(*count, 7);
        for c in 0..7 {
            assert_eq!(s.train.iter().filter(|&&v| labels[v] == c).count(), 2);
        }
        assert!(s.train.iter().all(|v| !s.test.contains(v) && !s.validation.contains(v)));
    }

    #[test]
    fn remaining_nodes_become_test_set() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let d = load_cora_dir(dir.path(), &split(3, 4, None), Seed(2)).unwrap();
        let s = d.split.unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (21, 4, 10));
    }

    #[test]
    fn oversized_split_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        assert!(load_cora_dir(dir.path(), &split(6, 0, None), Seed(0)).is_err());
        assert!(load_cora_dir(dir.path(), &CoraSplit::default(), Seed(0)).is_err());
    }

    #[test]
    fn errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_cora_dir(dir.path(), &CoraSplit::default(), Seed(0)).unwrap_err();
        assert!(err.to_string().contains("cora.content"), "{err}");

        write_fixture(dir.path());
        fs::write(dir.path().join("cora.cites"), "100\t999\n").unwrap();
        let err = load_cora_dir(dir.path(), &split(1, 0, None), Seed(0)).unwrap_err();
        assert!(err.to_string().contains("cora.cites:1"), "{err}");

        fs::write(dir.path().join("cora.content"), "1\t0\t2\tTheory\n").unwrap();
        let err = load_cora_dir(dir.path(), &split(1, 0, None), Seed(0)).unwrap_err();
        assert!(err.to_string().contains("cora.content:1"), "{err}");
    }
}
