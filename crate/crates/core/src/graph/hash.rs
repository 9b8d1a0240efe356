use super::ColoredGraph;
use crate::seed::splitmix64;

pub const WL_ROUNDS: usize = 3;

/// Digest of the empty graph.
pub const EMPTY_DIGEST: u64 = 0x6A09_E667_F3BC_C908;

fn combine(acc: u64, x: u64) -> u64 {
    splitmix64(acc.rotate_left(23) ^ x)
}

/// Weisfeiler-Leman color refinement digest.
///
/// Labels start from node colors; each round a node's label becomes a hash
/// of its own label and the sorted multiset of `(edge color, neighbor
/// label)` pairs. The final digest hashes the sorted label multiset together
/// with node and edge counts, so it does not depend on node numbering.
/// Distinct graphs may collide.
pub fn wl_hash(g: &ColoredGraph, rounds: usize) -> u64 {
    let n = g.node_count();
    if n == 0 {
        return EMPTY_DIGEST;
    }
    let adj = g.adjacency();
    let mut labels: Vec<u64> = g
        .node_colors()
        .iter()
        .map(|&c| splitmix64(0xC010_u64 ^ u64::from(c)))
        .collect();
    let mut scratch = Vec::new();
    for round in 0..rounds.max(1) {
        let next: Vec<u64> = (0..n)
            .map(|x| {
                scratch.clear();
                scratch.extend(
                    adj[x]
                        .iter()
                        .map(|&(y, c)| combine(splitmix64(u64::from(c) + 1), labels[y])),
                );
                scratch.sort_unstable();
                let seed = combine(labels[x], round as u64);
                scratch.iter().fold(seed, |acc, &m| combine(acc, m))
            })
            .collect();
        labels = next;
    }
    labels.sort_unstable();
    let head = combine(n as u64, g.edge_count() as u64);
    labels.iter().fold(head, |acc, &l| combine(acc, l))
}
