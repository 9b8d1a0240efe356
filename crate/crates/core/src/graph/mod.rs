//! Node- and edge-colored undirected simple graphs.

mod count;
mod decompose;
mod hash;
mod matching;
mod sample;
mod successors;
pub mod text;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use count::{count_connected_subgraphs, MAX_COUNT_NODES};
pub use decompose::decompose_positives;
pub use hash::{wl_hash, EMPTY_DIGEST, WL_ROUNDS};
pub use matching::{is_isomorphic, is_subgraph};
pub use sample::{random_tree, sample_random_tree};
pub use successors::{apply, expand_successors, MaxDegree, Modification, Successor, SuccessorFilter};

pub type Color = u8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("edge endpoint {0} out of range for {1} nodes")]
    NodeOutOfRange(usize, usize),
    #[error("{kind} color {color} outside palette of {limit}")]
    ColorOutOfRange {
        kind: &'static str,
        color: usize,
        limit: usize,
    },
    #[error("a tree needs at least one node")]
    EmptyTree,
    #[error("graph has {0} nodes, limit is {1}")]
    TooLarge(usize, usize),
    #[error("graph is empty")]
    Empty,
    #[error("graph is not connected")]
    Disconnected,
    #[error("modification {0:?} does not apply to this graph")]
    InvalidModification(Modification),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Sizes of the node and edge color alphabets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorSpace {
    pub node_colors: usize,
    pub edge_colors: usize,
}

impl ColorSpace {
    pub fn new(node_colors: usize, edge_colors: usize) -> Self {
        Self {
            node_colors,
            edge_colors,
        }
    }

    pub fn contains(&self, g: &ColoredGraph) -> bool {
        g.node_colors.iter().all(|&c| usize::from(c) < self.node_colors)
            && g.edges.iter().all(|e| usize::from(e.color) < self.edge_colors)
    }
}

/// An undirected edge as stored; `u`/`v` keep the orientation they were
/// inserted with so the text format round-trips exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub color: Color,
}

impl Edge {
    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }

    pub fn touches(&self, x: usize) -> bool {
        self.u == x || self.v == x
    }

    fn key(&self) -> (usize, usize) {
        (self.u.min(self.v), self.u.max(self.v))
    }
}

/// A simple undirected graph with one color per node and per edge.
///
/// Invariants (enforced by every constructor and mutator): no self-loops,
/// no parallel edges, all endpoints in range.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct ColoredGraph {
    node_colors: Vec<Color>,
    edges: Vec<Edge>,
}

impl ColoredGraph {
    pub fn new(node_colors: Vec<Color>, edges: Vec<(usize, usize, Color)>) -> Result<Self, GraphError> {
        let mut g = Self {
            node_colors,
            edges: Vec::with_capacity(edges.len()),
        };
        for (u, v, c) in edges {
            g.add_edge(u, v, c)?;
        }
        Ok(g)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(color: Color) -> Self {
        Self {
            node_colors: vec![color],
            edges: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_colors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_colors.is_empty()
    }

    pub fn node_colors(&self) -> &[Color] {
        &self.node_colors
    }

    pub fn node_color(&self, i: usize) -> Color {
        self.node_colors[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|e| e.touches(i)).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    /// Neighbor lists as `(neighbor, edge color)` pairs.
    pub fn adjacency(&self) -> Vec<Vec<(usize, Color)>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for e in &self.edges {
            adj[e.u].push((e.v, e.color));
            adj[e.v].push((e.u, e.color));
        }
        adj
    }

    pub fn edge_color(&self, u: usize, v: usize) -> Option<Color> {
        let key = (u.min(v), u.max(v));
        self.edges.iter().find(|e| e.key() == key).map(|e| e.color)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_color(u, v).is_some()
    }

    pub fn add_node(&mut self, color: Color) -> usize {
        self.node_colors.push(color);
        self.node_colors.len() - 1
    }

    pub fn add_edge(&mut self, u: usize, v: usize, color: Color) -> Result<(), GraphError> {
        let n = self.node_count();
        if u >= n || v >= n {
            return Err(GraphError::NodeOutOfRange(u.max(v), n));
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if self.has_edge(u, v) {
            return Err(GraphError::DuplicateEdge(u, v));
        }
        self.edges.push(Edge { u, v, color });
        Ok(())
    }

    pub fn remove_edge_at(&mut self, idx: usize) -> Edge {
        self.edges.remove(idx)
    }

    /// Removes node `x` and its incident edges; higher indices shift down.
    pub fn remove_node(&mut self, x: usize) {
        self.node_colors.remove(x);
        self.edges.retain(|e| !e.touches(x));
        for e in &mut self.edges {
            if e.u > x {
                e.u -= 1;
            }
            if e.v > x {
                e.v -= 1;
            }
        }
    }

    /// Connected, or empty.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == n
    }

    pub fn is_tree(&self) -> bool {
        self.node_count() > 0 && self.edge_count() + 1 == self.node_count() && self.is_connected()
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.node_count());
        let mut node_colors = vec![0; self.node_count()];
        for (i, &p) in perm.iter().enumerate() {
            node_colors[p] = self.node_colors[i];
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                u: perm[e.u],
                v: perm[e.v],
                color: e.color,
            })
            .collect();
        Self { node_colors, edges }
    }
}

impl fmt::Debug for ColoredGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{:?}", self.node_colors)?;
        let edges: Vec<String> = self
            .edges
            .iter()
            .map(|e| format!("{}-{}:{}", e.u, e.v, e.color))
            .collect();
        write!(f, "{{{}}}", edges.join(" "))
    }
}
