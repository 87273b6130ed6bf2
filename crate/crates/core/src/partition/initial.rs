//! Initial k-way partition of the coarsest graph by seeded region growing.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use super::wgraph::WGraph;

const NONE: usize = usize::MAX;

/// Grows `s` regions one after another. Each region starts from a
/// pseudo-peripheral vertex of the largest remaining component and absorbs
/// the frontier vertex most strongly connected to it (lowest index on ties)
/// until it reaches its share of the remaining weight. When a component is
/// exhausted, growth continues in the next largest one, so disconnected
/// pieces are handed out greedily by size. The last region takes the rest.
pub(crate) fn grow_regions<R: Rng>(g: &WGraph, s: usize, rng: &mut R) -> Vec<usize> {
    let n = g.len();
    let mut part = vec![NONE; n];
    if s == 1 {
        return vec![0; n];
    }
    let mut component = vec![0usize; n];
    for (c, members) in g.components().iter().enumerate() {
        for &v in members {
            component[v] = c;
        }
    }
    let n_components = component.iter().copied().max().map_or(0, |m| m + 1);

    let mut remaining_weight = g.total_weight();
    let mut unassigned = n;
    let mut conn = vec![0i64; n];

    for c in 0..s - 1 {
        let clusters_left = s - c;
        let target = remaining_weight as f64 / clusters_left as f64;
        let mut weight = 0i64;
        let mut heap: BinaryHeap<(i64, Reverse<usize>)> = BinaryHeap::new();
        let mut touched = Vec::new();

        while (weight as f64) < target && unassigned > clusters_left - 1 {
            let v = loop {
                match heap.pop() {
                    Some((k, Reverse(v))) if part[v] == NONE && conn[v] == k => break Some(v),
                    Some(_) => continue,
                    None => break None,
                }
            };
            let v = match v {
                Some(v) => v,
                None => {
                    let Some(start) = pick_seed(g, &part, &component, n_components, rng) else {
                        break;
                    };
                    start
                }
            };
            part[v] = c;
            weight += g.vwgt[v];
            unassigned -= 1;
            for (u, w) in g.neighbors(v) {
                if part[u] == NONE {
                    if conn[u] == 0 {
                        touched.push(u);
                    }
                    conn[u] += w;
                    heap.push((conn[u], Reverse(u)));
                }
            }
        }
        for u in touched {
            conn[u] = 0;
        }
        remaining_weight -= weight;
    }
    for p in part.iter_mut() {
        if *p == NONE {
            *p = s - 1;
        }
    }
    part
}

/// A pseudo-peripheral unassigned vertex in the component with the largest
/// unassigned weight: the last vertex reached by a BFS from a random start.
fn pick_seed<R: Rng>(
    g: &WGraph,
    part: &[usize],
    component: &[usize],
    n_components: usize,
    rng: &mut R,
) -> Option<usize> {
    let mut free_weight = vec![0i64; n_components];
    for v in 0..g.len() {
        if part[v] == NONE {
            free_weight[component[v]] += g.vwgt[v];
        }
    }
    // Largest component first; lowest component id on ties.
    let (best, &w) = free_weight
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    if w == 0 {
        return None;
    }
    let candidates: Vec<usize> = (0..g.len())
        .filter(|&v| part[v] == NONE && component[v] == best)
        .collect();
    let start = candidates[rng.random_range(0..candidates.len())];

    let mut seen = vec![false; g.len()];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for (u, _) in g.neighbors(v) {
            if !seen[u] && part[u] == NONE {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    Some(last)
}
