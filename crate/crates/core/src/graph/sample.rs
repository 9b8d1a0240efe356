use rand::Rng;

use super::{ColorSpace, ColoredGraph, GraphError};
use crate::seed;

/// Uniformly random labeled tree on `n` nodes with i.i.d. uniform node and
/// edge colors, drawn from `rng`.
///
/// Topologies for `n >= 3` come from decoding a uniform Prüfer sequence.
pub fn random_tree<R: Rng + ?Sized>(
    n: usize,
    colors: ColorSpace,
    rng: &mut R,
) -> Result<ColoredGraph, GraphError> {
    if n == 0 {
        return Err(GraphError::EmptyTree);
    }
    let pairs = match n {
        1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => {
            let code: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
            prufer_edges(&code, n)
        }
    };
    let node_colors = (0..n)
        .map(|_| rng.gen_range(0..colors.node_colors) as u8)
        .collect();
    let edges = pairs
        .into_iter()
        .map(|(u, v)| (u, v, rng.gen_range(0..colors.edge_colors) as u8))
        .collect();
    ColoredGraph::new(node_colors, edges)
}

/// Seeded entry point; the same seed always yields the same tree.
pub fn sample_random_tree(n: usize, colors: ColorSpace, seed: u64) -> Result<ColoredGraph, GraphError> {
    random_tree(n, colors, &mut seed::rng(seed))
}

fn prufer_edges(code: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &x in code {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &x in code {
        let leaf = (0..n).find(|&i| degree[i] == 1).expect("a leaf exists");
        edges.push((leaf, x));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}
