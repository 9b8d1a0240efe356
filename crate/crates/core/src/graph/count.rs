use std::collections::HashSet;

use super::{ColoredGraph, GraphError};

pub const MAX_COUNT_NODES: usize = 20;

type EdgeMask = [u64; 3];

fn with_bit(mut m: EdgeMask, i: usize) -> EdgeMask {
    m[i / 64] |= 1 << (i % 64);
    m
}

fn has_bit(m: &EdgeMask, i: usize) -> bool {
    m[i / 64] & (1 << (i % 64)) != 0
}

/// Number of distinct connected subgraphs `(V', E')` of `g` with `V'`
/// non-empty, i.e. every state a one-edge-at-a-time construction can pass
/// through, counted by node and edge identity.
///
/// Exhaustive search, exponential in the worst case; limited to
/// [`MAX_COUNT_NODES`] nodes.
pub fn count_connected_subgraphs(g: &ColoredGraph) -> Result<u64, GraphError> {
    let n = g.node_count();
    if n > MAX_COUNT_NODES {
        return Err(GraphError::TooLarge(n, MAX_COUNT_NODES));
    }
    let edges = g.edges();
    let mut seen: HashSet<(u32, EdgeMask)> = HashSet::new();
    let mut stack: Vec<(u32, EdgeMask)> = Vec::new();
    for x in 0..n {
        let s = (1u32 << x, [0; 3]);
        if seen.insert(s) {
            stack.push(s);
        }
    }
    while let Some((nodes, mask)) = stack.pop() {
        for (i, e) in edges.iter().enumerate() {
            if has_bit(&mask, i) {
                continue;
            }
            let (in_u, in_v) = (nodes >> e.u & 1 == 1, nodes >> e.v & 1 == 1);
            if !(in_u || in_v) {
                continue;
            }
            let next = (nodes | 1 << e.u | 1 << e.v, with_bit(mask, i));
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    Ok(seen.len() as u64)
}
