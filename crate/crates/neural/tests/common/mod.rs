#![allow(dead_code)]

use grasp_core::graph::random_tree;
use grasp_core::{seed, ColorSpace, ColoredGraph, RasterImage};
use grasp_neural::{Model, ModelConfig, ParamSet, Scalar};
use rand::seq::SliceRandom;
use rand::Rng;

/// d = 8, one block per stage.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        hidden: 8,
        rounds: 2,
        image_size: 16,
        stem_kernel: 2,
        stem_stride: 2,
        channels: vec![8, 16, 16],
        blocks_per_stage: 1,
        ..ModelConfig::default()
    }
}

/// Initial parameters with every coordinate jittered, so that zero-initialized
/// blocks (FiLM, biases) take part in the computation too.
pub fn randomized<T: Scalar>(model: &Model, seed_value: u64, jitter: f64) -> ParamSet<T> {
    let mut rng = seed::rng(seed_value);
    let mut p = model.init::<T, _>(&mut rng);
    for t in p.tensors_mut() {
        for v in &mut t.data {
            *v += T::of(rng.gen_range(-jitter..jitter));
        }
    }
    p
}

pub fn noise_image(size: usize, seed_value: u64) -> RasterImage {
    let mut rng = seed::rng(seed_value);
    let pixels = (0..size * size * 3).map(|_| rng.gen()).collect();
    RasterImage::from_pixels(size, size, pixels).unwrap()
}

/// A random tree with up to `extra` additional edges.
pub fn random_graph<R: Rng>(rng: &mut R, max_nodes: usize, extra: usize) -> ColoredGraph {
    let colors = ColorSpace::new(2, 1);
    let n = rng.gen_range(1..=max_nodes);
    let mut g = random_tree(n, colors, rng).unwrap();
    for _ in 0..extra {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v && !g.has_edge(u, v) {
            g.add_edge(u, v, 0).unwrap();
        }
    }
    g
}

pub fn shuffled<R: Rng>(g: &ColoredGraph, rng: &mut R) -> ColoredGraph {
    let mut perm: Vec<usize> = (0..g.node_count()).collect();
    perm.shuffle(rng);
    g.permute(&perm)
}
