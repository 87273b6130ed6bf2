//! Undirected vertex- and edge-weighted graph used at every level of the
//! multilevel hierarchy, plus heavy-edge matching coarsening.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::LineGraph;

const UNMATCHED: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct WGraph {
    pub xadj: Vec<usize>,
    pub adjncy: Vec<usize>,
    pub adjwgt: Vec<i64>,
    pub vwgt: Vec<i64>,
}

impl WGraph {
    /// Symmetrized line graph with unit vertex and edge weights.
    pub fn from_line_graph(g: &LineGraph) -> Self {
        let n = g.node_count();
        let pairs = g.undirected_edges();
        let mut degree = vec![0usize; n];
        for &(a, b) in &pairs {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut xadj = vec![0usize; n + 1];
        for v in 0..n {
            xadj[v + 1] = xadj[v] + degree[v];
        }
        let mut fill = xadj.clone();
        let mut adjncy = vec![0usize; xadj[n]];
        for &(a, b) in &pairs {
            adjncy[fill[a]] = b;
            fill[a] += 1;
            adjncy[fill[b]] = a;
            fill[b] += 1;
        }
        for v in 0..n {
            adjncy[xadj[v]..xadj[v + 1]].sort_unstable();
        }
        let adjwgt = vec![1; adjncy.len()];
        WGraph {
            xadj,
            adjncy,
            adjwgt,
            vwgt: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.vwgt.len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let span = self.xadj[v]..self.xadj[v + 1];
        self.adjncy[span.clone()]
            .iter()
            .copied()
            .zip(self.adjwgt[span].iter().copied())
    }

    pub fn total_weight(&self) -> i64 {
        self.vwgt.iter().sum()
    }

    /// Total weight of edges whose endpoints lie in different parts.
    #[cfg(test)]
    pub fn cut(&self, part: &[usize]) -> i64 {
        let mut cut = 0;
        for v in 0..self.len() {
            for (u, w) in self.neighbors(v) {
                if part[u] != part[v] {
                    cut += w;
                }
            }
        }
        cut / 2
    }

    /// Connected components as lists of vertices, each sorted ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut comp = vec![UNMATCHED; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != UNMATCHED {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut head = 0;
            while head < members.len() {
                let v = members[head];
                head += 1;
                for (u, _) in self.neighbors(v) {
                    if comp[u] == UNMATCHED {
                        comp[u] = id;
                        members.push(u);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// One round of heavy-edge matching. Vertices are visited in a seeded
    /// random order; each unmatched vertex pairs with the unmatched neighbor
    /// joined by the heaviest edge (lowest index on ties), provided the merged
    /// weight stays within `max_vwgt`. Returns the coarse graph and the map
    /// from fine to coarse vertices.
    pub fn coarsen<R: Rng>(&self, rng: &mut R, max_vwgt: i64) -> (WGraph, Vec<usize>) {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut mate = vec![UNMATCHED; n];
        for &v in &order {
            if mate[v] != UNMATCHED {
                continue;
            }
            let mut best: Option<(i64, usize)> = None;
            for (u, w) in self.neighbors(v) {
                if u == v || mate[u] != UNMATCHED || self.vwgt[v] + self.vwgt[u] > max_vwgt {
                    continue;
                }
                best = match best {
                    Some((bw, bu)) if bw > w || (bw == w && bu < u) => Some((bw, bu)),
                    _ => Some((w, u)),
                };
            }
            match best {
                Some((_, u)) => {
                    mate[v] = u;
                    mate[u] = v;
                }
                None => mate[v] = v,
            }
        }

        // Coarse ids follow the lower fine index of each pair.
        let mut cmap = vec![UNMATCHED; n];
        let mut cn = 0;
        for v in 0..n {
            if cmap[v] == UNMATCHED {
                cmap[v] = cn;
                cmap[mate[v]] = cn;
                cn += 1;
            }
        }

        let mut members: Vec<Vec<usize>> = vec![Vec::with_capacity(2); cn];
        for v in 0..n {
            members[cmap[v]].push(v);
        }
        let mut xadj = Vec::with_capacity(cn + 1);
        let mut adjncy = Vec::new();
        let mut adjwgt = Vec::new();
        let mut vwgt = Vec::with_capacity(cn);
        let mut slot = vec![UNMATCHED; cn];
        xadj.push(0);
        for (c, group) in members.iter().enumerate() {
            let start = adjncy.len();
            vwgt.push(group.iter().map(|&v| self.vwgt[v]).sum());
            for &v in group {
                for (u, w) in self.neighbors(v) {
                    let cu = cmap[u];
                    if cu == c {
                        continue;
                    }
                    if slot[cu] == UNMATCHED {
                        slot[cu] = adjncy.len();
                        adjncy.push(cu);
                        adjwgt.push(w);
                    } else {
                        adjwgt[slot[cu]] += w;
                    }
                }
            }
            for &cu in &adjncy[start..] {
                slot[cu] = UNMATCHED;
            }
            // Keep neighbor lists sorted for deterministic traversal.
            let mut pairs: Vec<(usize, i64)> = adjncy[start..]
                .iter()
                .copied()
                .zip(adjwgt[start..].iter().copied())
                .collect();
            pairs.sort_unstable();
            for (k, (cu, w)) in pairs.into_iter().enumerate() {
                adjncy[start + k] = cu;
                adjwgt[start + k] = w;
            }
            xadj.push(adjncy.len());
        }
        (
            WGraph {
                xadj,
                adjncy,
                adjwgt,
                vwgt,
            },
            cmap,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Seed;
    use ndarray::Array2;

    fn path(n: usize) -> LineGraph {
        let edges = (0..n - 1).map(|i| (i, i + 1)).collect();
        LineGraph::new((0..n as u64).collect(), edges, vec![], Array2::zeros((n, 0))).unwrap()
    }

    #[test]
    fn coarsening_preserves_weights_and_cut_structure() {
        let g = WGraph::from_line_graph(&path(10));
        let (c, cmap) = g.coarsen(&mut Seed(1).rng(), 2);
        assert_eq!(c.total_weight(), 10);
        assert!(c.len() < 10 && c.len() >= 5);
        // A coarse cut projects to a fine cut of identical weight.
        let coarse_part: Vec<usize> = (0..c.len()).map(|v| v % 2).collect();
        let fine_part: Vec<usize> = cmap.iter().map(|&cv| coarse_part[cv]).collect();
        assert_eq!(c.cut(&coarse_part), g.cut(&fine_part));
    }

    #[test]
    fn weight_cap_blocks_matching() {
        let g = WGraph::from_line_graph(&path(4));
        let (c, _) = g.coarsen(&mut Seed(1).rng(), 1);
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn components_found() {
        let g = LineGraph::new((0..5).collect(), vec![(0, 1), (3, 4)], vec![], Array2::zeros((5, 0)))
            .unwrap();
        let comps = WGraph::from_line_graph(&g).components();
        assert_eq!(comps, vec![vec![0, 1], vec![2], vec![3, 4]]);
    }
}
