//! Greedy recognition: grow the graph one successor at a time, always
//! taking the best-scored candidate, until the terminal candidate wins.

use grasp_core::graph::{expand_successors, Modification, Successor};
use grasp_core::mdp::{self, EnvState, EpisodeOutcome};
use grasp_core::{ColoredGraph, RasterImage, TaskConfig};
use grasp_neural::{Model, ParamSet, Sample};

use crate::TrainError;

/// What a scorer sees of an episode. `target` is filled in only for
/// judged episodes and is meant for oracle scorers; learned scorers
/// ignore it.
#[derive(Clone, Copy, Debug)]
pub struct ScoreContext<'a> {
    pub image: &'a RasterImage,
    pub target: Option<&'a ColoredGraph>,
}

pub trait Scorer {
    /// One score per candidate; higher is better.
    fn score(&self, ctx: &ScoreContext<'_>, candidates: &[Successor]) -> Result<Vec<f64>, TrainError>;
}

/// Exact scorer: 1 for valid candidates, 0 otherwise.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleScorer;

impl Scorer for OracleScorer {
    fn score(&self, ctx: &ScoreContext<'_>, candidates: &[Successor]) -> Result<Vec<f64>, TrainError> {
        let target = ctx.target.ok_or(TrainError::OracleWithoutTarget)?;
        let current = current_graph(candidates);
        Ok(candidates
            .iter()
            .map(|c| f64::from(u8::from(mdp::is_valid_choice(current, c, target))))
            .collect())
    }
}

/// The terminal candidate is always last and carries the current graph.
fn current_graph(candidates: &[Successor]) -> &ColoredGraph {
    let last = candidates.last().expect("candidate sets are never empty");
    debug_assert!(last.modification.is_terminal());
    &last.graph
}

/// Flips the sign of another scorer.
pub struct Negated<S>(pub S);

impl<S: Scorer> Scorer for Negated<S> {
    fn score(&self, ctx: &ScoreContext<'_>, candidates: &[Successor]) -> Result<Vec<f64>, TrainError> {
        Ok(self.0.score(ctx, candidates)?.into_iter().map(|s| -s).collect())
    }
}

/// Scores candidates with the classifier's logits.
pub struct ModelScorer<'m> {
    pub model: &'m Model,
    pub params: &'m ParamSet<f32>,
    /// Candidates per forward pass.
    pub chunk: usize,
}

impl<'m> ModelScorer<'m> {
    pub fn new(model: &'m Model, params: &'m ParamSet<f32>) -> Self {
        Self {
            model,
            params,
            chunk: 256,
        }
    }
}

impl Scorer for ModelScorer<'_> {
    fn score(&self, ctx: &ScoreContext<'_>, candidates: &[Successor]) -> Result<Vec<f64>, TrainError> {
        let mut out = Vec::with_capacity(candidates.len());
        for chunk in candidates.chunks(self.chunk.max(1)) {
            let samples: Vec<Sample<'_>> = chunk
                .iter()
                .map(|c| Sample {
                    image: ctx.image,
                    graph: &c.graph,
                    terminal: c.modification.is_terminal(),
                })
                .collect();
            out.extend(self.model.logits(self.params, &samples)?.into_iter().map(f64::from));
        }
        Ok(out)
    }
}

/// One decision of an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub candidates: usize,
    pub scores: Vec<f64>,
    pub chosen: usize,
    pub modification: Modification,
    /// Number of valid candidates; known only for judged episodes.
    pub valid: Option<usize>,
    pub chosen_valid: Option<bool>,
    /// Whether the `valid` best-scored candidates are all valid.
    pub topk_hit: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub steps: Vec<StepRecord>,
    /// Present for judged episodes.
    pub outcome: Option<EpisodeOutcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub graph: ColoredGraph,
    pub record: TrajectoryRecord,
}

/// Index of the highest score; ties go to the lowest index and NaN never wins.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] || (scores[best].is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    best
}

/// Candidate indices ordered by descending score, ties by index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| key(scores[b]).total_cmp(&key(scores[a])).then(a.cmp(&b)));
    order
}

/// Step cap for episodes without a judge.
fn unjudged_cap(task: &TaskConfig) -> usize {
    4 * task.max_graph_nodes.saturating_sub(1).max(1)
}

/// Greedy decoding of `image`.
///
/// With a `judge` target the episode starts from a random target node
/// (chosen by `seed`), every pick is checked and an invalid one ends the
/// episode. Without one, the start node is the best-scored single node and
/// the episode ends at the terminal candidate or the step cap.
pub fn greedy_decode(
    image: &RasterImage,
    scorer: &dyn Scorer,
    task: &TaskConfig,
    judge: Option<&ColoredGraph>,
    seed: u64,
) -> Result<Decoded, TrainError> {
    let ctx = ScoreContext { image, target: judge };
    let mut state = match judge {
        Some(target) => mdp::initial_state(target, seed)?,
        None => {
            let starts: Vec<Successor> = expand_successors(&ColoredGraph::empty(), task.colors(), 1, &[])
                .into_iter()
                .filter(|s| !s.modification.is_terminal())
                .collect();
            let scores = scorer.score(&ctx, &starts)?;
            EnvState {
                current: starts[argmax(&scores)].graph.clone(),
                step_index: 0,
                terminated: false,
            }
        }
    };
    let mut steps = Vec::new();
    loop {
        let cands = mdp::candidates(&state, task)?;
        let scores = scorer.score(&ctx, &cands)?;
        if scores.len() != cands.len() {
            return Err(TrainError::ScoreCount {
                expected: cands.len(),
                got: scores.len(),
            });
        }
        let chosen = argmax(&scores);
        let mut record = StepRecord {
            candidates: cands.len(),
            scores,
            chosen,
            modification: cands[chosen].modification,
            valid: None,
            chosen_valid: None,
            topk_hit: None,
        };
        match judge {
            Some(target) => {
                let valid: Vec<bool> = cands
                    .iter()
                    .map(|c| mdp::is_valid_choice(&state.current, c, target))
                    .collect();
                let k = valid.iter().filter(|&&v| v).count();
                record.valid = Some(k);
                record.chosen_valid = Some(valid[chosen]);
                record.topk_hit = (k > 0).then(|| ranking(&record.scores)[..k].iter().all(|&i| valid[i]));
                steps.push(record);
                let (next, outcome) = mdp::judge_and_step(&state, &cands[chosen], target)?;
                state = next;
                if let Some(outcome) = outcome {
                    return Ok(Decoded {
                        graph: state.current,
                        record: TrajectoryRecord {
                            steps,
                            outcome: Some(outcome),
                        },
                    });
                }
            }
            None => {
                steps.push(record);
                let pick = &cands[chosen];
                if pick.modification.is_terminal() || steps.len() >= unjudged_cap(task) {
                    return Ok(Decoded {
                        graph: state.current,
                        record: TrajectoryRecord { steps, outcome: None },
                    });
                }
                state = EnvState {
                    current: pick.graph.clone(),
                    step_index: state.step_index + 1,
                    terminated: false,
                };
            }
        }
    }
}
