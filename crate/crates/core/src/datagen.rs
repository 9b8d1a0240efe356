//! Streaming sample factory.
//!
//! One [`SampleGroup`] per target graph: the rendered image plus labeled
//! (graph, terminal flag) triplets obtained by decomposing the target into
//! connected subgraphs and expanding those into one-step successors.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::{bounded, Receiver};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::text::{read_graph, read_graph_inline, write_graph, write_graph_inline};
use crate::graph::{
    decompose_positives, expand_successors, is_isomorphic, is_subgraph, random_tree, ColorSpace,
    ColoredGraph, GraphError, Modification,
};
use crate::render::{render, RasterImage, RenderConfig, RenderError};
use crate::seed;
use crate::task::TaskConfig;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("dump {path}: {msg}")]
    Dump { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatagenConfig {
    /// Randomized peel-down runs per target.
    pub decompositions: usize,
    /// Leaf-addition successors sampled per positive.
    pub max_leaf_additions: usize,
    /// Edge-addition successors sampled per positive.
    pub max_edge_additions: usize,
    /// Probability that a triplet is emitted in terminal form.
    pub terminal_fraction: f64,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            decompositions: 10,
            max_leaf_additions: 5,
            max_edge_additions: 5,
            terminal_fraction: 0.1,
        }
    }
}

/// A candidate graph with its terminal flag and ground-truth label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub graph: ColoredGraph,
    pub terminal: bool,
    pub label: bool,
}

impl Triplet {
    /// Positive iff a non-terminal subgraph of `target`, or a terminal
    /// graph isomorphic to it.
    pub fn oracle_label(graph: &ColoredGraph, terminal: bool, target: &ColoredGraph) -> bool {
        if terminal {
            is_isomorphic(graph, target)
        } else {
            is_subgraph(graph, target)
        }
    }
}

#[derive(Clone, Debug)]
pub struct SampleGroup {
    pub seed: u64,
    pub target: ColoredGraph,
    pub image: Arc<RasterImage>,
    pub positives: Vec<Triplet>,
    pub negatives: Vec<Triplet>,
}

impl SampleGroup {
    pub fn triplets(&self) -> impl Iterator<Item = &Triplet> {
        self.positives.iter().chain(&self.negatives)
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Validated generation settings; cheap to share across worker threads.
#[derive(Clone, Debug)]
pub struct Generator {
    task: TaskConfig,
    render: RenderConfig,
    datagen: DatagenConfig,
}

impl Generator {
    pub fn new(task: TaskConfig, render: RenderConfig, datagen: DatagenConfig) -> Result<Self, DatagenError> {
        task.validate().map_err(DatagenError::Config)?;
        render.check_palettes(task.node_colors, task.edge_colors)?;
        if !(0.0..=1.0).contains(&datagen.terminal_fraction) {
            return Err(DatagenError::Config("terminal_fraction outside [0, 1]".into()));
        }
        // Leaf additions on the target itself are always negative as long
        // as they fit under the size cap; edge additions are negative on
        // every tree with three or more nodes.
        let leaf_negatives = datagen.max_leaf_additions > 0 && task.max_graph_nodes > task.max_nodes;
        let edge_negatives = datagen.max_edge_additions > 0 && task.min_nodes >= 3;
        if !(leaf_negatives || edge_negatives) {
            return Err(DatagenError::Config(
                "settings cannot guarantee a negative sample per group".into(),
            ));
        }
        Ok(Self {
            task,
            render,
            datagen,
        })
    }

    pub fn task(&self) -> &TaskConfig {
        &self.task
    }

    pub fn render_config(&self) -> &RenderConfig {
        &self.render
    }

    pub fn datagen_config(&self) -> &DatagenConfig {
        &self.datagen
    }

    /// Samples a target tree and renders it.
    pub fn target_and_image(&self, seed: u64) -> Result<(ColoredGraph, RasterImage), DatagenError> {
        let mut rng = seed::rng(seed::derive_tagged(seed, "target"));
        let n = rng.gen_range(self.task.min_nodes..=self.task.max_nodes);
        let target = random_tree(n, self.task.colors(), &mut rng)?;
        let image = render(&target, &self.render, seed::derive_tagged(seed, "layout"))?;
        Ok((target, image))
    }

    /// Builds the full sample group for `seed`.
    pub fn generate_group(&self, seed: u64) -> Result<SampleGroup, DatagenError> {
        let (target, image) = self.target_and_image(seed)?;
        let colors = self.task.colors();
        let filters = self.task.filters();
        let mut rng = seed::rng(seed::derive_tagged(seed, "successors"));

        let decomposed = decompose_positives(
            &target,
            self.datagen.decompositions,
            seed::derive_tagged(seed, "decompose"),
        );
        let mut candidates: Vec<ColoredGraph> = Vec::new();
        for p in &decomposed {
            candidates.push(p.clone());
            let succ = expand_successors(p, colors, self.task.max_graph_nodes, &filters);
            let (leafs, edges): (Vec<_>, Vec<_>) = succ
                .into_iter()
                .filter(|s| !s.modification.is_terminal())
                .partition(|s| !matches!(s.modification, Modification::AddEdge { .. }));
            for s in leafs.choose_multiple(&mut rng, self.datagen.max_leaf_additions) {
                candidates.push(s.graph.clone());
            }
            for s in edges.choose_multiple(&mut rng, self.datagen.max_edge_additions) {
                candidates.push(s.graph.clone());
            }
        }

        let mut term_rng = seed::rng(seed::derive_tagged(seed, "terminal"));
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for graph in candidates {
            let terminal = term_rng.gen_bool(self.datagen.terminal_fraction);
            let label = Triplet::oracle_label(&graph, terminal, &target);
            let t = Triplet {
                graph,
                terminal,
                label,
            };
            if label {
                positives.push(t);
            } else {
                negatives.push(t);
            }
        }
        debug_assert!(!positives.is_empty() && !negatives.is_empty());
        Ok(SampleGroup {
            seed,
            target,
            image: Arc::new(image),
            positives,
            negatives,
        })
    }

    /// Group number `index` of the stream keyed by `master`.
    pub fn group_at(&self, master: u64, index: u64) -> Result<SampleGroup, DatagenError> {
        self.generate_group(seed::derive(master, index))
    }
}

/// Endless stream of sample groups produced by worker threads.
///
/// Group `i` is generated from `seed::derive(master, i)` by worker
/// `i % workers` and delivered strictly in index order, so the sequence is
/// the same for any worker count. Each worker owns a bounded queue and
/// blocks when it is full; dropping the stream stops and joins the workers.
pub struct GroupStream {
    receivers: Vec<Receiver<SampleGroup>>,
    handles: Vec<JoinHandle<()>>,
    next_index: u64,
    start: u64,
}

impl GroupStream {
    pub fn spawn(generator: Arc<Generator>, master: u64, start: u64, workers: usize, capacity: usize) -> Self {
        let workers = workers.max(1);
        let per_worker = (capacity / workers).max(1);
        let mut receivers = Vec::with_capacity(workers);
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let (tx, rx) = bounded(per_worker);
            let generator = Arc::clone(&generator);
            handles.push(std::thread::spawn(move || {
                let mut index = start + w as u64;
                loop {
                    let group = generator
                        .group_at(master, index)
                        .expect("generator settings validated at construction");
                    if tx.send(group).is_err() {
                        return;
                    }
                    index += workers as u64;
                }
            }));
            receivers.push(rx);
        }
        Self {
            receivers,
            handles,
            next_index: start,
            start,
        }
    }

    /// Index of the next group to be delivered.
    pub fn position(&self) -> u64 {
        self.next_index
    }

    pub fn next_group(&mut self) -> SampleGroup {
        let w = ((self.next_index - self.start) % self.receivers.len() as u64) as usize;
        let group = self.receivers[w]
            .recv()
            .expect("stream workers only stop when the stream is dropped");
        self.next_index += 1;
        group
    }
}

impl Iterator for GroupStream {
    type Item = SampleGroup;

    fn next(&mut self) -> Option<SampleGroup> {
        Some(self.next_group())
    }
}

impl Drop for GroupStream {
    fn drop(&mut self) {
        self.receivers.clear();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

/// A group read back from a dataset dump.
#[derive(Clone, Debug)]
pub struct DumpedGroup {
    pub seed: u64,
    pub target: ColoredGraph,
    pub colors: ColorSpace,
    pub image: RasterImage,
    pub triplets: Vec<Triplet>,
}

impl DumpedGroup {
    /// Indices of triplets whose stored label disagrees with the oracle.
    pub fn mislabeled(&self) -> Vec<usize> {
        self.triplets
            .iter()
            .enumerate()
            .filter(|(_, t)| Triplet::oracle_label(&t.graph, t.terminal, &self.target) != t.label)
            .map(|(i, _)| i)
            .collect()
    }
}

pub const TRIPLET_HEADER: &str = "graph\tterminal\tlabel";

/// Writes `<dir>/group_<seed>/{target.g, image.ppm, triplets.tsv}` and
/// returns the group directory.
pub fn write_dump(dir: &Path, group: &SampleGroup, colors: ColorSpace) -> Result<PathBuf, DatagenError> {
    let gdir = dir.join(format!("group_{}", group.seed));
    fs::create_dir_all(&gdir)?;
    fs::write(gdir.join("target.g"), write_graph(&group.target, colors))?;
    fs::write(gdir.join("image.ppm"), group.image.to_ppm())?;
    let mut tsv = String::from(TRIPLET_HEADER);
    tsv.push('\n');
    for t in group.triplets() {
        tsv.push_str(&format!(
            "{}\t{}\t{}\n",
            write_graph_inline(&t.graph, colors),
            u8::from(t.terminal),
            u8::from(t.label)
        ));
    }
    fs::write(gdir.join("triplets.tsv"), tsv)?;
    Ok(gdir)
}

pub fn read_dump(gdir: &Path) -> Result<DumpedGroup, DatagenError> {
    let fail = |msg: String| DatagenError::Dump {
        path: gdir.to_path_buf(),
        msg,
    };
    let name = gdir
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| fail("bad directory name".into()))?;
    let seed: u64 = name
        .strip_prefix("group_")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| fail("directory is not group_<seed>".into()))?;
    let (target, colors) = read_graph(&fs::read_to_string(gdir.join("target.g"))?)?;
    let image = RasterImage::from_ppm(&fs::read(gdir.join("image.ppm"))?)?;
    let tsv = fs::read_to_string(gdir.join("triplets.tsv"))?;
    let mut lines = tsv.lines();
    if lines.next() != Some(TRIPLET_HEADER) {
        return Err(fail("missing triplets header".into()));
    }
    let flag = |s: &str| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(fail(format!("bad flag {other:?}"))),
    };
    let mut triplets = Vec::new();
    for line in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        let [g, term, label] = cols[..] else {
            return Err(fail(format!("bad triplet line {line:?}")));
        };
        triplets.push(Triplet {
            graph: read_graph_inline(g)?.0,
            terminal: flag(term)?,
            label: flag(label)?,
        });
    }
    Ok(DumpedGroup {
        seed,
        target,
        colors,
        image,
        triplets,
    })
}
