use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::Rng;

use super::{RenderConfig, RenderError};
use crate::graph::ColoredGraph;
use crate::seed;

/// Node positions in the unit square.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub positions: Vec<(f64, f64)>,
    pub margin: f64,
}

pub fn min_pairwise_distance(positions: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..positions.len() {
        for j in 0..i {
            let (dx, dy) = (positions[i].0 - positions[j].0, positions[i].1 - positions[j].1);
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

/// BFS spanning tree as parent pointers (root has none).
fn spanning_tree(g: &ColoredGraph, root: usize) -> Vec<Option<usize>> {
    let adj = g.adjacency();
    let mut parent = vec![None; g.node_count()];
    let mut seen = vec![false; g.node_count()];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(x) = queue.pop_front() {
        for &(y, _) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                parent[y] = Some(x);
                queue.push_back(y);
            }
        }
    }
    parent
}

fn children(parent: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut ch = vec![Vec::new(); parent.len()];
    for (x, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            ch[*p].push(x);
        }
    }
    ch
}

/// Node minimizing the largest remaining component of its spanning tree.
fn centroid(g: &ColoredGraph) -> usize {
    let n = g.node_count();
    let parent = spanning_tree(g, 0);
    let ch = children(&parent);
    let mut size = vec![1usize; n];
    let mut order = vec![0];
    let mut i = 0;
    while i < order.len() {
        order.extend(ch[order[i]].iter().copied());
        i += 1;
    }
    for &x in order.iter().rev() {
        if let Some(p) = parent[x] {
            size[p] += size[x];
        }
    }
    (0..n)
        .min_by_key(|&x| {
            let below = ch[x].iter().map(|&c| size[c]).max().unwrap_or(0);
            below.max(n - size[x])
        })
        .expect("non-empty")
}

fn radial(g: &ColoredGraph) -> Vec<(f64, f64)> {
    let n = g.node_count();
    let root = centroid(g);
    let parent = spanning_tree(g, root);
    let ch = children(&parent);
    let mut depth = vec![0usize; n];
    let mut order = vec![root];
    let mut i = 0;
    while i < order.len() {
        let x = order[i];
        for &c in &ch[x] {
            depth[c] = depth[x] + 1;
            order.push(c);
        }
        i += 1;
    }
    let mut leaves = vec![0usize; n];
    for &x in order.iter().rev() {
        leaves[x] = if ch[x].is_empty() {
            1
        } else {
            ch[x].iter().map(|&c| leaves[c]).sum()
        };
    }
    let max_depth = depth.iter().copied().max().unwrap_or(0).max(1);
    let step = 1.0 / max_depth as f64;
    // Wedge [start, start + width) per node; children split their parent's
    // wedge in proportion to their leaf counts.
    let mut wedge = vec![(0.0, TAU); n];
    let mut pos = vec![(0.0, 0.0); n];
    for &x in &order {
        let (start, width) = wedge[x];
        if x != root {
            let a = start + width / 2.0;
            let r = depth[x] as f64 * step;
            pos[x] = (r * a.cos(), r * a.sin());
        }
        let mut s = start;
        for &c in &ch[x] {
            let w = width * leaves[c] as f64 / leaves[x] as f64;
            wedge[c] = (s, w);
            s += w;
        }
    }
    pos
}

fn place(base: &[(f64, f64)], cfg: &RenderConfig, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = seed::rng(seed);
    let theta = rng.gen_range(0.0..TAU);
    let (sin, cos) = theta.sin_cos();
    let half = 0.5 - cfg.margin;
    base.iter()
        .map(|&(x, y)| {
            let (rx, ry) = (x * cos - y * sin, x * sin + y * cos);
            let jx = rng.gen_range(-cfg.jitter..=cfg.jitter);
            let jy = rng.gen_range(-cfg.jitter..=cfg.jitter);
            let clamp = |v: f64| v.clamp(cfg.margin, 1.0 - cfg.margin);
            (clamp(0.5 + rx * half + jx), clamp(0.5 + ry * half + jy))
        })
        .collect()
}

/// Radial layout around a centroid, randomly rotated and jittered.
///
/// Up to `cfg.layout_retries` seeds are tried until the minimum pairwise
/// node distance reaches `cfg.min_distance`; otherwise the most spread-out
/// attempt is returned. Non-tree graphs are laid out along a BFS spanning
/// tree, so extra edges may cross.
pub fn layout_tree(g: &ColoredGraph, cfg: &RenderConfig, seed: u64) -> Result<Layout, RenderError> {
    if g.is_empty() {
        return Err(RenderError::EmptyGraph);
    }
    if g.node_count() == 1 {
        return Ok(Layout {
            positions: vec![(0.5, 0.5)],
            margin: cfg.margin,
        });
    }
    let base = radial(g);
    let mut best: Option<(f64, Vec<(f64, f64)>)> = None;
    for attempt in 0..cfg.layout_retries.max(1) {
        let positions = place(&base, cfg, seed::derive(seed, attempt as u64));
        let d = min_pairwise_distance(&positions);
        if d >= cfg.min_distance {
            return Ok(Layout {
                positions,
                margin: cfg.margin,
            });
        }
        if best.as_ref().is_none_or(|(b, _)| d > *b) {
            best = Some((d, positions));
        }
    }
    Ok(Layout {
        positions: best.expect("at least one attempt").1,
        margin: cfg.margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sample_random_tree, ColorSpace};

    #[test]
    fn single_node_centered() {
        let l = layout_tree(&ColoredGraph::single(0), &RenderConfig::default(), 3).unwrap();
        assert_eq!(l.positions, vec![(0.5, 0.5)]);
        assert!(layout_tree(&ColoredGraph::empty(), &RenderConfig::default(), 3).is_err());
    }

    #[test]
    fn centroid_of_path_is_middle() {
        let g = ColoredGraph::new(vec![0; 5], (1..5).map(|i| (i - 1, i, 0)).collect()).unwrap();
        assert_eq!(centroid(&g), 2);
    }

    #[test]
    fn positions_respect_margin_and_distance() {
        let cfg = RenderConfig::default();
        let mut violations = 0;
        for seed in 0..1000u64 {
            let n = 2 + (seed % 8) as usize;
            let g = sample_random_tree(n, ColorSpace::new(1, 1), seed).unwrap();
            let l = layout_tree(&g, &cfg, seed).unwrap();
            assert_eq!(l.positions.len(), n);
            for &(x, y) in &l.positions {
                assert!((cfg.margin..=1.0 - cfg.margin).contains(&x));
                assert!((cfg.margin..=1.0 - cfg.margin).contains(&y));
            }
            if min_pairwise_distance(&l.positions) < cfg.min_distance {
                violations += 1;
            }
        }
        assert_eq!(violations, 0);
    }

    #[test]
    fn general_graphs_accepted() {
        let tri = ColoredGraph::new(vec![0; 3], vec![(0, 1, 0), (1, 2, 0), (2, 0, 0)]).unwrap();
        let l = layout_tree(&tri, &RenderConfig::default(), 0).unwrap();
        assert!(min_pairwise_distance(&l.positions) >= 0.08);
    }
}
