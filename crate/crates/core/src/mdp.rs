//! The construction process used at decoding time: a state is the graph
//! built so far, actions add one leaf or one edge, and a terminal
//! self-transition ends the episode. The hidden target only judges moves.

use rand::Rng;
use thiserror::Error;

use crate::graph::{apply, expand_successors, is_isomorphic, is_subgraph, ColoredGraph, Successor};
use crate::seed;
use crate::task::TaskConfig;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("target graph is empty")]
    EmptyTarget,
    #[error("episode already terminated")]
    Terminated,
    #[error("choice is not a successor of the current state")]
    NotACandidate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvState {
    pub current: ColoredGraph,
    pub step_index: usize,
    pub terminated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeOutcome {
    /// Terminal chosen while the current graph is isomorphic to the target.
    pub success: bool,
    /// A non-subgraph successor was picked.
    pub aborted_invalid: bool,
    /// The step cap ran out before a terminal choice.
    pub truncated: bool,
    /// Accepted transitions, the terminal one included.
    pub length: usize,
}

impl EnvState {
    pub fn empty() -> Self {
        Self {
            current: ColoredGraph::empty(),
            step_index: 0,
            terminated: false,
        }
    }
}

/// Step cap for episodes judged against `target`.
pub fn step_cap(target: &ColoredGraph) -> usize {
    4 * target.edge_count().max(1)
}

/// A single node whose color is that of a uniformly chosen target node.
pub fn initial_state(target: &ColoredGraph, seed: u64) -> Result<EnvState, EnvError> {
    if target.is_empty() {
        return Err(EnvError::EmptyTarget);
    }
    let pick = seed::rng(seed).gen_range(0..target.node_count());
    Ok(EnvState {
        current: ColoredGraph::single(target.node_color(pick)),
        step_index: 0,
        terminated: false,
    })
}

pub fn candidates(state: &EnvState, task: &TaskConfig) -> Result<Vec<Successor>, EnvError> {
    if state.terminated {
        return Err(EnvError::Terminated);
    }
    Ok(expand_successors(
        &state.current,
        task.colors(),
        task.max_graph_nodes,
        &task.filters(),
    ))
}

/// Whether `choice` is a correct move from `current` toward `target`.
pub fn is_valid_choice(current: &ColoredGraph, choice: &Successor, target: &ColoredGraph) -> bool {
    if choice.modification.is_terminal() {
        is_isomorphic(current, target)
    } else {
        is_subgraph(&choice.graph, target)
    }
}

/// Applies `choice` and judges it against `target`. Returns the next state
/// and, when the episode ended, its outcome.
pub fn judge_and_step(
    state: &EnvState,
    choice: &Successor,
    target: &ColoredGraph,
) -> Result<(EnvState, Option<EpisodeOutcome>), EnvError> {
    if state.terminated {
        return Err(EnvError::Terminated);
    }
    match apply(&state.current, &choice.modification) {
        Ok(g) if g == choice.graph => {}
        _ => return Err(EnvError::NotACandidate),
    }
    let length = state.step_index + 1;
    let ended = |success, aborted_invalid, truncated| EpisodeOutcome {
        success,
        aborted_invalid,
        truncated,
        length: if aborted_invalid { state.step_index } else { length },
    };
    if choice.modification.is_terminal() {
        let done = EnvState {
            current: state.current.clone(),
            step_index: length,
            terminated: true,
        };
        let success = is_isomorphic(&state.current, target);
        return Ok((done, Some(ended(success, false, false))));
    }
    if !is_subgraph(&choice.graph, target) {
        let done = EnvState {
            terminated: true,
            ..state.clone()
        };
        return Ok((done, Some(ended(false, true, false))));
    }
    let next = EnvState {
        current: choice.graph.clone(),
        step_index: length,
        terminated: false,
    };
    if length >= step_cap(target) {
        let done = EnvState {
            terminated: true,
            ..next
        };
        return Ok((done, Some(ended(false, false, true))));
    }
    Ok((next, None))
}
