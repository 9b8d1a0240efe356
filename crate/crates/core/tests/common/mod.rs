#![allow(dead_code)]

use grasp_core::ColoredGraph;

/// Brute-force monomorphism test: tries every injective map from the nodes
/// of `g` into the nodes of `h`.
pub fn brute_force_subgraph(g: &ColoredGraph, h: &ColoredGraph) -> bool {
    let n = g.node_count();
    if n > h.node_count() {
        return false;
    }
    let mut map = Vec::with_capacity(n);
    let mut used = vec![false; h.node_count()];
    assign(g, h, &mut map, &mut used)
}

fn assign(g: &ColoredGraph, h: &ColoredGraph, map: &mut Vec<usize>, used: &mut [bool]) -> bool {
    if map.len() == g.node_count() {
        return g.node_colors().iter().enumerate().all(|(i, &c)| h.node_color(map[i]) == c)
            && g
                .edges()
                .iter()
                .all(|e| h.edge_color(map[e.u], map[e.v]) == Some(e.color));
    }
    for y in 0..h.node_count() {
        if !used[y] {
            used[y] = true;
            map.push(y);
            if assign(g, h, map, used) {
                return true;
            }
            map.pop();
            used[y] = false;
        }
    }
    false
}

pub fn brute_force_isomorphic(g: &ColoredGraph, h: &ColoredGraph) -> bool {
    g.node_count() == h.node_count()
        && g.edge_count() == h.edge_count()
        && brute_force_subgraph(g, h)
}

/// All connected subgraphs (node subset + edge subset) of a small graph,
/// materialized with nodes renumbered in increasing order.
pub fn all_connected_subgraphs(g: &ColoredGraph) -> Vec<ColoredGraph> {
    let n = g.node_count();
    let m = g.edge_count();
    let mut out = Vec::new();
    for nodes in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|&x| nodes >> x & 1 == 1).collect();
        let inside: Vec<usize> = (0..m)
            .filter(|&i| {
                let e = g.edges()[i];
                nodes >> e.u & 1 == 1 && nodes >> e.v & 1 == 1
            })
            .collect();
        for mask in 0u32..(1 << inside.len()) {
            let mut sub = ColoredGraph::empty();
            for &x in &idx {
                sub.add_node(g.node_color(x));
            }
            for (k, &i) in inside.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    let e = g.edges()[i];
                    let pu = idx.iter().position(|&x| x == e.u).unwrap();
                    let pv = idx.iter().position(|&x| x == e.v).unwrap();
                    sub.add_edge(pu, pv, e.color).unwrap();
                }
            }
            if sub.is_connected() {
                out.push(sub);
            }
        }
    }
    out
}

/// Random (not necessarily connected) colored graph.
pub fn random_graph(rng: &mut impl rand::Rng, n: usize, density: f64, nc: u8, ec: u8) -> ColoredGraph {
    let mut g = ColoredGraph::empty();
    for _ in 0..n {
        g.add_node(rng.gen_range(0..nc));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(density) {
                g.add_edge(u, v, rng.gen_range(0..ec)).unwrap();
            }
        }
    }
    g
}

pub fn random_permutation(rng: &mut impl rand::Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
