//! Minimum-cost spanning in-arborescences by cycle contraction.

use std::fmt::Debug;
use std::ops::{Add, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub trait Weight: Copy + Ord + Add<Output = Self> + Sub<Output = Self> + Default + Debug + Send + Sync {}

impl<T: Copy + Ord + Add<Output = T> + Sub<Output = T> + Default + Debug + Send + Sync> Weight for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge<W> {
    pub from: usize,
    pub to: usize,
    pub weight: W,
}

/// A spanning tree in which every node except `root` has exactly one
/// outgoing edge and all paths end at `root`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arborescence<W> {
    pub root: usize,
    /// Index into the input edge list of each node's outgoing tree edge.
    pub out_edge: Vec<Option<usize>>,
    pub cost: W,
}

impl<W> Arborescence<W> {
    pub fn edge_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.out_edge.iter().flatten().copied()
    }
}

#[derive(Clone, Copy)]
struct Arc<W> {
    // Orientation is reversed from the input: `src` is the tree parent.
    src: usize,
    dst: usize,
    weight: W,
    id: usize,
}

/// Exact minimum in-arborescence rooted at `root`. Among equal-weight
/// candidate edges the one listed first wins, so callers control tie-breaks
/// through edge order.
pub fn min_cost_arborescence<W: Weight>(n: usize, edges: &[Edge<W>], root: usize) -> Result<Arborescence<W>> {
    assert!(root < n, "root out of range");
    let arcs: Vec<Arc<W>> = edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.from != e.to && e.from != root)
        .map(|(id, e)| Arc { src: e.to, dst: e.from, weight: e.weight, id })
        .collect();
    let chosen = branching(n, &arcs, root).ok_or(Error::RootUnreachable(root))?;
    let mut out_edge = vec![None; n];
    let mut cost = W::default();
    for id in chosen {
        out_edge[edges[id].from] = Some(id);
        cost = cost + edges[id].weight;
    }
    Ok(Arborescence { root, out_edge, cost })
}

/// Minimum out-branching from `root` spanning all `n` nodes; returns arc ids.
fn branching<W: Weight>(n: usize, arcs: &[Arc<W>], root: usize) -> Option<Vec<usize>> {
    // Cheapest incoming arc per node, first listed on ties.
    let mut best: Vec<Option<usize>> = vec![None; n];
    for (k, a) in arcs.iter().enumerate() {
        if a.dst == root || a.src == a.dst {
            continue;
        }
        match best[a.dst] {
            Some(b) if arcs[b].weight <= a.weight => {}
            _ => best[a.dst] = Some(k),
        }
    }
    if (0..n).any(|v| v != root && best[v].is_none()) {
        return None;
    }

    // Label cycles of the functional graph v -> src(best[v]).
    let mut comp = vec![usize::MAX; n];
    let mut state = vec![0u8; n]; // 0 unvisited, 1 on current walk, 2 done
    let mut cycles = 0;
    for start in 0..n {
        let mut path = Vec::new();
        let mut v = start;
        while v != root && state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = arcs[best[v].unwrap()].src;
        }
        if v != root && state[v] == 1 {
            let mut u = v;
            loop {
                comp[u] = cycles;
                u = arcs[best[u].unwrap()].src;
                if u == v {
                    break;
                }
            }
            cycles += 1;
        }
        for u in path {
            state[u] = 2;
        }
    }
    if cycles == 0 {
        return Some((0..n).filter(|&v| v != root).map(|v| arcs[best[v].unwrap()].id).collect());
    }

    let mut next = cycles;
    for c in comp.iter_mut() {
        if *c == usize::MAX {
            *c = next;
            next += 1;
        }
    }
    let in_cycle = |v: usize| comp[v] < cycles;
    let mut sub = Vec::new();
    let mut origin = Vec::new();
    for (k, a) in arcs.iter().enumerate() {
        let (cs, cd) = (comp[a.src], comp[a.dst]);
        if cs == cd {
            continue;
        }
        let weight = if in_cycle(a.dst) { a.weight - arcs[best[a.dst].unwrap()].weight } else { a.weight };
        sub.push(Arc { src: cs, dst: cd, weight, id: sub.len() });
        origin.push(k);
    }
    let chosen = branching(next, &sub, comp[root])?;

    let mut result = Vec::with_capacity(n - 1);
    let mut entered = vec![false; n];
    for s in chosen {
        let a = &arcs[origin[s]];
        if in_cycle(a.dst) {
            entered[a.dst] = true;
        }
        result.push(a.id);
    }
    for v in 0..n {
        if in_cycle(v) && !entered[v] {
            result.push(arcs[best[v].unwrap()].id);
        }
    }
    Some(result)
}

/// Every spanning in-arborescence by exhaustive choice of out-edges; only for
/// tiny graphs.
pub fn brute_force_min_arborescence<W: Weight>(n: usize, edges: &[Edge<W>], root: usize) -> Option<W> {
    let options: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            if v == root {
                vec![usize::MAX]
            } else {
                (0..edges.len()).filter(|&e| edges[e].from == v && edges[e].to != v).collect()
            }
        })
        .collect();
    if options.iter().any(Vec::is_empty) {
        return None;
    }
    let mut idx = vec![0usize; n];
    let mut best: Option<W> = None;
    loop {
        let choice: Vec<usize> = (0..n).map(|v| options[v][idx[v]]).collect();
        let reaches_root = (0..n).all(|start| {
            let mut v = start;
            for _ in 0..n {
                if v == root {
                    return true;
                }
                v = edges[choice[v]].to;
            }
            v == root
        });
        if reaches_root {
            let cost = (0..n).filter(|&v| v != root).fold(W::default(), |acc, v| acc + edges[choice[v]].weight);
            if best.is_none_or(|b| cost < b) {
                best = Some(cost);
            }
        }
        let mut f = 0;
        while f < n {
            idx[f] += 1;
            if idx[f] < options[f].len() {
                break;
            }
            idx[f] = 0;
            f += 1;
        }
        if f == n {
            return best;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub graphs: usize,
    pub roots: usize,
    pub mismatches: usize,
}

/// Compares [`min_cost_arborescence`] with exhaustive enumeration on random
/// digraphs with 2 to `max_nodes` nodes, each arc present with probability
/// one half and integer weights in `1..=5`.
pub fn cross_check_random(graphs: usize, max_nodes: usize, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut roots, mut mismatches) = (0, 0);
    for _ in 0..graphs {
        let n = rng.gen_range(2..=max_nodes.max(2));
        let mut edges = Vec::new();
        for from in 0..n {
            for to in (0..n).filter(|&t| t != from) {
                if rng.gen_bool(0.5) {
                    edges.push(Edge { from, to, weight: rng.gen_range(1i64..=5) });
                }
            }
        }
        for root in 0..n {
            roots += 1;
            let fast = min_cost_arborescence(n, &edges, root).ok().map(|t| t.cost);
            if fast != brute_force_min_arborescence(n, &edges, root) {
                mismatches += 1;
            }
        }
    }
    OracleReport { graphs, roots, mismatches }
}
