//! Exact colored subgraph monomorphism by VF2-style backtracking.

use super::{Color, ColoredGraph};

const NO_EDGE: u8 = u8::MAX;

/// True iff there is an injective map from the nodes of `g` into the nodes
/// of `h` that preserves node colors and sends every edge of `g` onto an
/// edge of `h` with the same color. The image need not be induced.
pub fn is_subgraph(g: &ColoredGraph, h: &ColoredGraph) -> bool {
    let n = g.node_count();
    if n == 0 {
        return true;
    }
    if n > h.node_count() || g.edge_count() > h.edge_count() {
        return false;
    }
    if !histogram_fits(g.node_colors().iter().copied(), h.node_colors().iter().copied())
        || !histogram_fits(
            g.edges().iter().map(|e| e.color),
            h.edges().iter().map(|e| e.color),
        )
    {
        return false;
    }
    Matcher::new(g, h).run()
}

/// Colored isomorphism: same node and edge counts plus a monomorphism.
pub fn is_isomorphic(g: &ColoredGraph, h: &ColoredGraph) -> bool {
    g.node_count() == h.node_count() && g.edge_count() == h.edge_count() && is_subgraph(g, h)
}

fn histogram_fits(small: impl Iterator<Item = Color>, large: impl Iterator<Item = Color>) -> bool {
    let mut counts = [0i32; 256];
    for c in large {
        counts[usize::from(c)] += 1;
    }
    for c in small {
        counts[usize::from(c)] -= 1;
        if counts[usize::from(c)] < 0 {
            return false;
        }
    }
    true
}

struct Matcher<'a> {
    g: &'a ColoredGraph,
    h: &'a ColoredGraph,
    /// Pattern nodes in matching order.
    order: Vec<usize>,
    /// For each position: (earlier position, required edge color).
    back_edges: Vec<Vec<(usize, Color)>>,
    g_deg: Vec<usize>,
    h_deg: Vec<usize>,
    h_adj: Vec<Vec<(usize, Color)>>,
    /// Dense edge-color matrix of `h`, `NO_EDGE` where absent.
    h_mat: Vec<u8>,
    /// Image of the pattern node at each position.
    image: Vec<usize>,
    used: Vec<bool>,
}

impl<'a> Matcher<'a> {
    fn new(g: &'a ColoredGraph, h: &'a ColoredGraph) -> Self {
        let n = g.node_count();
        let hn = h.node_count();
        let g_deg = g.degrees();
        let g_adj = g.adjacency();
        let mut h_mat = vec![NO_EDGE; hn * hn];
        for e in h.edges() {
            h_mat[e.u * hn + e.v] = e.color;
            h_mat[e.v * hn + e.u] = e.color;
        }

        // Greedy connectivity order: each next node has as many already
        // placed neighbors as possible, ties broken by degree then index.
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        let mut links = vec![0usize; n];
        for _ in 0..n {
            let next = (0..n)
                .filter(|&x| !placed[x])
                .max_by_key(|&x| (links[x], g_deg[x], std::cmp::Reverse(x)))
                .expect("unplaced node");
            placed[next] = true;
            order.push(next);
            for &(y, _) in &g_adj[next] {
                links[y] += 1;
            }
        }
        let mut pos = vec![0; n];
        for (i, &x) in order.iter().enumerate() {
            pos[x] = i;
        }
        let back_edges = order
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                g_adj[x]
                    .iter()
                    .filter(|(y, _)| pos[*y] < i)
                    .map(|&(y, c)| (pos[y], c))
                    .collect()
            })
            .collect();

        Self {
            g,
            h,
            order,
            back_edges,
            g_deg,
            h_deg: h.degrees(),
            h_adj: h.adjacency(),
            h_mat,
            image: vec![usize::MAX; n],
            used: vec![false; hn],
        }
    }

    fn run(&mut self) -> bool {
        self.extend(0)
    }

    fn feasible(&self, pos: usize, cand: usize) -> bool {
        let x = self.order[pos];
        if self.used[cand]
            || self.g.node_color(x) != self.h.node_color(cand)
            || self.g_deg[x] > self.h_deg[cand]
        {
            return false;
        }
        let hn = self.h.node_count();
        self.back_edges[pos]
            .iter()
            .all(|&(p, c)| self.h_mat[self.image[p] * hn + cand] == c)
    }

    fn extend(&mut self, pos: usize) -> bool {
        if pos == self.order.len() {
            return true;
        }
        // Candidates come from the neighborhood of an already mapped
        // neighbor when there is one.
        let candidates: Vec<usize> = match self.back_edges[pos].first() {
            Some(&(p, _)) => self.h_adj[self.image[p]].iter().map(|&(y, _)| y).collect(),
            None => (0..self.h.node_count()).collect(),
        };
        for cand in candidates {
            if self.feasible(pos, cand) {
                self.image[pos] = cand;
                self.used[cand] = true;
                if self.extend(pos + 1) {
                    return true;
                }
                self.used[cand] = false;
            }
        }
        false
    }
}
