use std::collections::HashSet;

use rand::seq::SliceRandom;

use super::{wl_hash, ColoredGraph, WL_ROUNDS};
use crate::seed;

#[derive(Clone, Copy, Debug)]
enum Peel {
    /// Delete an edge that lies on a cycle; all nodes stay.
    CycleEdge(usize),
    /// Delete a degree-1 node together with its only edge.
    Leaf(usize),
}

fn peel_moves(g: &ColoredGraph) -> Vec<Peel> {
    let deg = g.degrees();
    let mut moves: Vec<Peel> = (0..g.node_count())
        .filter(|&x| deg[x] == 1)
        .map(Peel::Leaf)
        .collect();
    for (i, e) in g.edges().iter().enumerate() {
        if deg[e.u] > 1 && deg[e.v] > 1 {
            let mut rest = g.clone();
            rest.remove_edge_at(i);
            if rest.is_connected() {
                moves.push(Peel::CycleEdge(i));
            }
        }
    }
    moves
}

fn apply_peel(g: &ColoredGraph, m: Peel) -> ColoredGraph {
    let mut out = g.clone();
    match m {
        Peel::CycleEdge(i) => {
            out.remove_edge_at(i);
        }
        Peel::Leaf(x) => out.remove_node(x),
    }
    out
}

/// Runs `runs` randomized peel-downs of a connected `target` and returns the
/// distinct graphs met along the way, in emission order (the target first).
///
/// Each step removes either a cycle edge or a leaf together with its edge,
/// so every intermediate graph stays connected and is a subgraph of the
/// target; a run ends at a single node. Graphs are deduplicated by WL
/// digest across all runs; steps prefer moves leading to unseen digests and
/// only fall back to already-visited branches when nothing new is
/// reachable.
pub fn decompose_positives(target: &ColoredGraph, runs: usize, seed: u64) -> Vec<ColoredGraph> {
    debug_assert!(target.is_connected());
    let mut rng = seed::rng(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    if target.is_empty() {
        return out;
    }
    for _ in 0..runs.max(1) {
        let mut cur = target.clone();
        if seen.insert(wl_hash(&cur, WL_ROUNDS)) {
            out.push(cur.clone());
        }
        while cur.node_count() > 1 {
            let next: Vec<(ColoredGraph, u64)> = peel_moves(&cur)
                .into_iter()
                .map(|m| {
                    let g = apply_peel(&cur, m);
                    let h = wl_hash(&g, WL_ROUNDS);
                    (g, h)
                })
                .collect();
            let fresh: Vec<&(ColoredGraph, u64)> =
                next.iter().filter(|(_, h)| !seen.contains(h)).collect();
            let (g, h) = if fresh.is_empty() {
                next.choose(&mut rng).expect("connected graph with >1 node has a peel")
            } else {
                *fresh.choose(&mut rng).expect("non-empty")
            };
            if seen.insert(*h) {
                out.push(g.clone());
            }
            cur = g.clone();
        }
    }
    out
}
