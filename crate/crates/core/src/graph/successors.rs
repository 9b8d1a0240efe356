use super::{Color, ColorSpace, ColoredGraph, GraphError};

/// One step of graph construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modification {
    /// First node of an empty graph.
    AddNode { color: Color },
    /// New node of `node_color` attached to `attach` by an edge of `edge_color`.
    AddLeaf {
        attach: usize,
        node_color: Color,
        edge_color: Color,
    },
    /// New edge between two existing, non-adjacent nodes.
    AddEdge { u: usize, v: usize, color: Color },
    /// Self-transition that ends decoding.
    Terminal,
}

impl Modification {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Modification::Terminal)
    }
}

/// A candidate next state together with the modification producing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Successor {
    pub modification: Modification,
    pub graph: ColoredGraph,
}

/// Domain rule pruning candidate modifications before they are emitted.
pub trait SuccessorFilter: Send + Sync {
    fn allows(&self, graph: &ColoredGraph, modification: &Modification) -> bool;
}

/// Valence rule: never grow a node whose degree already reached the limit
/// (e.g. four for carbon in molecule drawings).
#[derive(Clone, Copy, Debug)]
pub struct MaxDegree(pub usize);

impl SuccessorFilter for MaxDegree {
    fn allows(&self, graph: &ColoredGraph, modification: &Modification) -> bool {
        match *modification {
            Modification::AddLeaf { attach, .. } => graph.degree(attach) < self.0,
            Modification::AddEdge { u, v, .. } => {
                graph.degree(u) < self.0 && graph.degree(v) < self.0
            }
            Modification::AddNode { .. } | Modification::Terminal => true,
        }
    }
}

/// Applies `m` to `g`, validating that it is legal.
pub fn apply(g: &ColoredGraph, m: &Modification) -> Result<ColoredGraph, GraphError> {
    let mut out = g.clone();
    match *m {
        Modification::AddNode { color } => {
            if !g.is_empty() {
                return Err(GraphError::InvalidModification(*m));
            }
            out.add_node(color);
        }
        Modification::AddLeaf {
            attach,
            node_color,
            edge_color,
        } => {
            if attach >= g.node_count() {
                return Err(GraphError::InvalidModification(*m));
            }
            let x = out.add_node(node_color);
            out.add_edge(attach, x, edge_color)?;
        }
        Modification::AddEdge { u, v, color } => {
            out.add_edge(u, v, color)
                .map_err(|_| GraphError::InvalidModification(*m))?;
        }
        Modification::Terminal => {}
    }
    Ok(out)
}

/// Enumerates every successor of `g` in a fixed order: leaf additions by
/// (attach, node color, edge color), then edge additions by (u, v, color)
/// with `u < v`, then one terminal self-transition. An empty `g` instead
/// gets one bare node per node color. Successors with more than `max_nodes`
/// nodes are skipped, and `filters` prune the rest.
///
/// Candidates are positional: isomorphic duplicates are kept.
pub fn expand_successors(
    g: &ColoredGraph,
    colors: ColorSpace,
    max_nodes: usize,
    filters: &[Box<dyn SuccessorFilter>],
) -> Vec<Successor> {
    let n = g.node_count();
    let mut mods = Vec::new();
    if n == 0 {
        if max_nodes >= 1 {
            mods.extend((0..colors.node_colors).map(|c| Modification::AddNode { color: c as Color }));
        }
    } else {
        if n < max_nodes {
            for attach in 0..n {
                for nc in 0..colors.node_colors {
                    for ec in 0..colors.edge_colors {
                        mods.push(Modification::AddLeaf {
                            attach,
                            node_color: nc as Color,
                            edge_color: ec as Color,
                        });
                    }
                }
            }
        }
        for u in 0..n {
            for v in u + 1..n {
                if !g.has_edge(u, v) {
                    for ec in 0..colors.edge_colors {
                        mods.push(Modification::AddEdge {
                            u,
                            v,
                            color: ec as Color,
                        });
                    }
                }
            }
        }
    }
    mods.retain(|m| filters.iter().all(|f| f.allows(g, m)));
    mods.push(Modification::Terminal);
    mods.into_iter()
        .map(|modification| Successor {
            graph: apply(g, &modification).expect("enumerated modification is legal"),
            modification,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_kinds(s: &[Successor]) -> (usize, usize, usize) {
        let leaf = s
            .iter()
            .filter(|x| matches!(x.modification, Modification::AddLeaf { .. } | Modification::AddNode { .. }))
            .count();
        let edge = s
            .iter()
            .filter(|x| matches!(x.modification, Modification::AddEdge { .. }))
            .count();
        let term = s.iter().filter(|x| x.modification.is_terminal()).count();
        (leaf, edge, term)
    }

    #[test]
    fn single_node_two_colors() {
        let s = expand_successors(&ColoredGraph::single(0), ColorSpace::new(2, 1), 32, &[]);
        assert_eq!(count_kinds(&s), (2, 0, 1));
    }

    #[test]
    fn p2_one_color() {
        let g = ColoredGraph::new(vec![0, 0], vec![(0, 1, 0)]).unwrap();
        let s = expand_successors(&g, ColorSpace::new(1, 1), 32, &[]);
        assert_eq!(count_kinds(&s), (2, 0, 1));
    }

    #[test]
    fn p3_closes_triangle() {
        let g = ColoredGraph::new(vec![0; 3], vec![(0, 1, 0), (1, 2, 0)]).unwrap();
        let s = expand_successors(&g, ColorSpace::new(1, 1), 32, &[]);
        assert_eq!(count_kinds(&s), (3, 1, 1));
        assert_eq!(s[3].modification, Modification::AddEdge { u: 0, v: 2, color: 0 });
        assert_eq!(s.last().unwrap().graph, g);
    }

    #[test]
    fn empty_graph_seeds_one_node_per_color() {
        let s = expand_successors(&ColoredGraph::empty(), ColorSpace::new(3, 2), 32, &[]);
        assert_eq!(s.len(), 4);
        assert_eq!(s[1].graph, ColoredGraph::single(1));
    }

    #[test]
    fn max_nodes_and_degree_filter() {
        let star = ColoredGraph::new(vec![0; 5], vec![(0, 1, 0), (0, 2, 0), (0, 3, 0), (0, 4, 0)]).unwrap();
        let capped = expand_successors(&star, ColorSpace::new(1, 1), 5, &[]);
        assert_eq!(count_kinds(&capped), (0, 6, 1));
        let filters: Vec<Box<dyn SuccessorFilter>> = vec![Box::new(MaxDegree(4))];
        let s = expand_successors(&star, ColorSpace::new(1, 1), 32, &filters);
        // Center is saturated: leaves can still grow and pair up.
        assert_eq!(count_kinds(&s), (4, 6, 1));
        assert!(s.iter().all(|x| !matches!(x.modification, Modification::AddLeaf { attach: 0, .. })));
    }

    #[test]
    fn order_is_lexicographic() {
        let g = ColoredGraph::new(vec![0, 1], vec![(0, 1, 0)]).unwrap();
        let s = expand_successors(&g, ColorSpace::new(2, 2), 32, &[]);
        let leafs: Vec<(usize, u8, u8)> = s
            .iter()
            .filter_map(|x| match x.modification {
                Modification::AddLeaf { attach, node_color, edge_color } => Some((attach, node_color, edge_color)),
                _ => None,
            })
            .collect();
        let mut sorted = leafs.clone();
        sorted.sort();
        assert_eq!(leafs, sorted);
        assert_eq!(leafs.len(), 8);
    }

    #[test]
    fn apply_rejects_illegal() {
        let g = ColoredGraph::new(vec![0, 0], vec![(0, 1, 0)]).unwrap();
        assert!(apply(&g, &Modification::AddEdge { u: 0, v: 1, color: 0 }).is_err());
        assert!(apply(&g, &Modification::AddNode { color: 0 }).is_err());
        assert!(apply(&g, &Modification::AddLeaf { attach: 5, node_color: 0, edge_color: 0 }).is_err());
    }
}
