use serde::{Deserialize, Serialize};

use crate::graph::{ColorSpace, MaxDegree, SuccessorFilter};

/// Describes one family of recognition problems: the size range of target
/// trees, the color alphabets and the successor rules used when expanding
/// states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub node_colors: usize,
    pub edge_colors: usize,
    /// Successors with more nodes than this are never generated.
    pub max_graph_nodes: usize,
    /// Optional valence rule: no additions at nodes whose degree already
    /// reached this value (0 disables the rule).
    pub max_degree: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            min_nodes: 3,
            max_nodes: 5,
            node_colors: 2,
            edge_colors: 1,
            max_graph_nodes: 32,
            max_degree: 0,
        }
    }
}

impl TaskConfig {
    pub fn colors(&self) -> ColorSpace {
        ColorSpace::new(self.node_colors, self.edge_colors)
    }

    pub fn filters(&self) -> Vec<Box<dyn SuccessorFilter>> {
        let mut out: Vec<Box<dyn SuccessorFilter>> = Vec::new();
        if self.max_degree > 0 {
            out.push(Box::new(MaxDegree(self.max_degree)));
        }
        out
    }

    /// The same task with targets of exactly `n` nodes.
    pub fn with_size(&self, n: usize) -> Self {
        Self {
            min_nodes: n,
            max_nodes: n,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.node_colors == 0 || self.edge_colors == 0 {
            return Err("color counts must be positive".into());
        }
        if self.node_colors > 255 || self.edge_colors > 255 {
            return Err("at most 255 colors per alphabet".into());
        }
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes {
            return Err(format!(
                "invalid size range [{}, {}]",
                self.min_nodes, self.max_nodes
            ));
        }
        if self.max_graph_nodes < self.max_nodes {
            return Err("max_graph_nodes below max_nodes".into());
        }
        Ok(())
    }
}
