//! Colored graphs, exact subgraph matching, rendering and the streaming
//! sample factory used to train a subgraph classifier over (graph, image)
//! pairs.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: the [`ColoredGraph`] type and every exact combinatorial
//!   routine on it (matching, hashing, sampling, decomposition, successor
//!   expansion, counting).
//! - [`mdp`]: the sequential decision process used for decoding.
//! - [`render`]: deterministic fixed-point drawing of graphs to RGB rasters.
//! - [`datagen`]: per-image sample groups and the ordered multi-worker stream.
//! - [`buffers`]: the dual FIFO replay that yields class-balanced batches.

pub mod buffers;
pub mod datagen;
pub mod graph;
pub mod mdp;
pub mod render;
pub mod seed;
pub mod task;

pub use graph::{ColorSpace, ColoredGraph, Edge, GraphError, Modification, Successor};
pub use render::RasterImage;
pub use task::TaskConfig;
