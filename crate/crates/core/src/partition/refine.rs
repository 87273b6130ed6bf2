//! Boundary refinement (Kernighan–Lin/Fiduccia–Mattheyses style) and
//! balance repair for k-way partitions.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::wgraph::WGraph;

/// Moves without improvement tolerated before a pass gives up.
const HILL_CLIMB_LIMIT: usize = 64;
const MAX_PASSES: usize = 10;

struct State<'a> {
    g: &'a WGraph,
    part: &'a mut [usize],
    weights: Vec<i64>,
    max_weight: i64,
}

impl<'a> State<'a> {
    fn new(g: &'a WGraph, part: &'a mut [usize], s: usize, max_weight: i64) -> Self {
        let mut weights = vec![0i64; s];
        for v in 0..g.len() {
            weights[part[v]] += g.vwgt[v];
        }
        State {
            g,
            part,
            weights,
            max_weight,
        }
    }

    /// Edge weight from `v` into each part it touches, sorted by part id.
    fn connections(&self, v: usize) -> Vec<(usize, i64)> {
        let mut conns: Vec<(usize, i64)> = Vec::new();
        for (u, w) in self.g.neighbors(v) {
            let p = self.part[u];
            match conns.iter_mut().find(|(q, _)| *q == p) {
                Some(entry) => entry.1 += w,
                None => conns.push((p, w)),
            }
        }
        conns.sort_unstable();
        conns
    }

    /// Best feasible move of `v` to an adjacent part: `(gain, target)`.
    /// Highest gain wins, then the lowest part id.
    fn best_move(&self, v: usize) -> Option<(i64, usize)> {
        let own = self.part[v];
        let vw = self.g.vwgt[v];
        if self.weights[own] - vw < 1 {
            return None;
        }
        let conns = self.connections(v);
        let internal = conns
            .iter()
            .find(|(p, _)| *p == own)
            .map_or(0, |&(_, w)| w);
        let mut best: Option<(i64, usize)> = None;
        for &(p, w) in &conns {
            if p == own || self.weights[p] + vw > self.max_weight {
                continue;
            }
            let gain = w - internal;
            if best.is_none_or(|(bg, _)| gain > bg) {
                best = Some((gain, p));
            }
        }
        best
    }

    fn apply(&mut self, v: usize, to: usize) {
        let vw = self.g.vwgt[v];
        self.weights[self.part[v]] -= vw;
        self.weights[to] += vw;
        self.part[v] = to;
    }

    fn is_boundary(&self, v: usize) -> bool {
        self.g.neighbors(v).any(|(u, _)| self.part[u] != self.part[v])
    }

    /// One pass: greedily apply the best available move, allowing negative
    /// gains, each vertex at most once; then undo everything after the
    /// prefix with the largest cumulative gain. Returns that gain (≥ 0).
    fn pass(&mut self) -> i64 {
        let n = self.g.len();
        let mut moved = vec![false; n];
        let mut heap: BinaryHeap<(i64, Reverse<usize>, Reverse<usize>)> = BinaryHeap::new();
        for v in 0..n {
            if self.is_boundary(v) {
                if let Some((gain, to)) = self.best_move(v) {
                    heap.push((gain, Reverse(v), Reverse(to)));
                }
            }
        }

        let mut log: Vec<(usize, usize)> = Vec::new();
        let mut cumulative = 0i64;
        let mut best = 0i64;
        let mut best_len = 0usize;
        while let Some((gain, Reverse(v), Reverse(to))) = heap.pop() {
            if moved[v] {
                continue;
            }
            match self.best_move(v) {
                Some(current) if current == (gain, to) => {}
                Some((g2, t2)) => {
                    heap.push((g2, Reverse(v), Reverse(t2)));
                    continue;
                }
                None => continue,
            }
            let from = self.part[v];
            self.apply(v, to);
            moved[v] = true;
            log.push((v, from));
            cumulative += gain;
            if cumulative > best {
                best = cumulative;
                best_len = log.len();
            }
            if log.len() - best_len > HILL_CLIMB_LIMIT {
                break;
            }
            for (u, _) in self.g.neighbors(v) {
                if !moved[u] {
                    if let Some((g2, t2)) = self.best_move(u) {
                        heap.push((g2, Reverse(u), Reverse(t2)));
                    }
                }
            }
        }
        for &(v, from) in log[best_len..].iter().rev() {
            self.apply(v, from);
        }
        best
    }

    /// Moves vertices out of overweight parts, preferring the move that
    /// loses the least cut, until every part fits or no move is possible.
    fn rebalance(&mut self) {
        let n = self.g.len();
        loop {
            let Some(heavy) = (0..self.weights.len())
                .filter(|&p| self.weights[p] > self.max_weight)
                .max_by_key(|&p| (self.weights[p], Reverse(p)))
            else {
                return;
            };
            let mut best: Option<(i64, Reverse<usize>, Reverse<usize>)> = None;
            for v in (0..n).filter(|&v| self.part[v] == heavy) {
                let vw = self.g.vwgt[v];
                let conns = self.connections(v);
                let internal = conns
                    .iter()
                    .find(|(p, _)| *p == heavy)
                    .map_or(0, |&(_, w)| w);
                for p in 0..self.weights.len() {
                    if p == heavy || self.weights[p] + vw > self.max_weight {
                        continue;
                    }
                    let ext = conns.iter().find(|(q, _)| *q == p).map_or(0, |&(_, w)| w);
                    let cand = (ext - internal, Reverse(v), Reverse(p));
                    if best.is_none_or(|b| cand > b) {
                        best = Some(cand);
                    }
                }
            }
            match best {
                Some((_, Reverse(v), Reverse(p))) => self.apply(v, p),
                None => return,
            }
        }
    }

    /// Gives every empty part the cheapest vertex of the heaviest part.
    fn fill_empty(&mut self) {
        let n = self.g.len();
        while let Some(empty) = (0..self.weights.len()).find(|&p| self.weights[p] == 0) {
            let heavy = (0..self.weights.len())
                .max_by_key(|&p| (self.weights[p], Reverse(p)))
                .expect("at least one part");
            let candidate = (0..n)
                .filter(|&v| self.part[v] == heavy && self.weights[heavy] - self.g.vwgt[v] >= 1)
                .min_by_key(|&v| {
                    let internal: i64 = self
                        .g
                        .neighbors(v)
                        .filter(|&(u, _)| self.part[u] == heavy)
                        .map(|(_, w)| w)
                        .sum();
                    (internal, v)
                });
            match candidate {
                Some(v) => self.apply(v, empty),
                None => return,
            }
        }
    }
}

/// Runs refinement passes until one yields no gain. The cut never increases.
pub(crate) fn refine(g: &WGraph, part: &mut [usize], s: usize, max_weight: i64) -> i64 {
    let mut state = State::new(g, part, s, max_weight);
    let mut total = 0;
    for _ in 0..MAX_PASSES {
        let gain = state.pass();
        total += gain;
        if gain == 0 {
            break;
        }
    }
    total
}

/// Repairs empty and overweight parts.
pub(crate) fn balance(g: &WGraph, part: &mut [usize], s: usize, max_weight: i64) {
    let mut state = State::new(g, part, s, max_weight);
    state.fill_empty();
    state.rebalance();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LineGraph;
    use ndarray::Array2;

    fn wgraph(n: usize, edges: Vec<(usize, usize)>) -> WGraph {
        WGraph::from_line_graph(
            &LineGraph::new((0..n as u64).collect(), edges, vec![], Array2::zeros((n, 0))).unwrap(),
        )
    }

    #[test]
    fn refinement_fixes_a_misplaced_vertex() {
        // Two triangles joined by one edge; vertex 2 starts on the wrong side.
        let g = wgraph(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]);
        let mut part = vec![0, 0, 1, 1, 1, 0];
        let before = g.cut(&part);
        // Slack of one lets the two misplaced vertices swap sides.
        refine(&g, &mut part, 2, 4);
        assert!(g.cut(&part) < before);
        assert_eq!(g.cut(&part), 1);
    }

    #[test]
    fn rebalance_respects_cap() {
        let g = wgraph(6, (0..5).map(|i| (i, i + 1)).collect());
        let mut part = vec![0, 0, 0, 0, 0, 1];
        balance(&g, &mut part, 2, 3);
        let zeros = part.iter().filter(|&&p| p == 0).count();
        assert_eq!(zeros, 3);
        assert_eq!(g.cut(&part), 1);
    }

    #[test]
    fn empty_parts_are_filled() {
        let g = wgraph(4, vec![(0, 1), (1, 2), (2, 3)]);
        let mut part = vec![0, 0, 0, 0];
        balance(&g, &mut part, 3, 2);
        for p in 0..3 {
            assert!(part.contains(&p));
        }
    }
}
