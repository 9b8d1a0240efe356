//! Dual FIFO replay with class-balanced batch sampling.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::datagen::{SampleGroup, Triplet};
use crate::render::RasterImage;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BufferError {
    #[error("buffers not warmed up: {positives} positive / {negatives} negative images")]
    NotWarmedUp { positives: usize, negatives: usize },
    #[error("batch size {0} must be even and positive")]
    OddBatch(usize),
    #[error("group {seed} rejected: {reason}")]
    BadGroup { seed: u64, reason: &'static str },
}

/// One image with the triplets of a single class.
#[derive(Clone, Debug)]
pub struct BufferEntry {
    pub image: Arc<RasterImage>,
    pub seed: u64,
    pub triplets: Vec<Triplet>,
}

/// One row of a training batch.
#[derive(Clone, Debug)]
pub struct BatchItem {
    pub image: Arc<RasterImage>,
    pub triplet: Triplet,
}

/// Two FIFO buffers, positives and negatives, holding at most `capacity`
/// distinct images in total. An image shared by both buffers is stored once.
#[derive(Clone, Debug)]
pub struct DualBuffer {
    capacity: usize,
    positives: VecDeque<BufferEntry>,
    negatives: VecDeque<BufferEntry>,
}

impl DualBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            positives: VecDeque::new(),
            negatives: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// (positive entries, negative entries).
    pub fn sizes(&self) -> (usize, usize) {
        (self.positives.len(), self.negatives.len())
    }

    /// Distinct images held across both buffers.
    pub fn images(&self) -> usize {
        self.positives.len().max(self.negatives.len())
    }

    pub fn positives(&self) -> &VecDeque<BufferEntry> {
        &self.positives
    }

    pub fn negatives(&self) -> &VecDeque<BufferEntry> {
        &self.negatives
    }

    /// True once at least `fraction` of the capacity is filled.
    pub fn is_warm(&self, fraction: f64) -> bool {
        let need = ((self.capacity as f64 * fraction).ceil() as usize).max(1);
        self.positives.len().min(self.negatives.len()) >= need
    }

    /// Inserts the group's image into both buffers and evicts the oldest
    /// images beyond capacity.
    pub fn push_group(&mut self, group: &SampleGroup) -> Result<(), BufferError> {
        let bad = |reason| BufferError::BadGroup {
            seed: group.seed,
            reason,
        };
        if group.positives.is_empty() || group.negatives.is_empty() {
            return Err(bad("group lacks one of the classes"));
        }
        if !group.positives.iter().all(|t| t.label) || group.negatives.iter().any(|t| t.label) {
            return Err(bad("triplet label does not match its buffer"));
        }
        self.positives.push_back(BufferEntry {
            image: Arc::clone(&group.image),
            seed: group.seed,
            triplets: group.positives.clone(),
        });
        self.negatives.push_back(BufferEntry {
            image: Arc::clone(&group.image),
            seed: group.seed,
            triplets: group.negatives.clone(),
        });
        while self.positives.len() > self.capacity {
            self.positives.pop_front();
        }
        while self.negatives.len() > self.capacity {
            self.negatives.pop_front();
        }
        Ok(())
    }

    /// `batch_size / 2` draws from each buffer; a draw picks an image
    /// uniformly (with replacement) and then one of its triplets uniformly.
    /// Positives come first in the returned batch.
    pub fn sample_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<BatchItem>, BufferError> {
        if batch_size == 0 || batch_size % 2 != 0 {
            return Err(BufferError::OddBatch(batch_size));
        }
        if self.positives.is_empty() || self.negatives.is_empty() {
            return Err(BufferError::NotWarmedUp {
                positives: self.positives.len(),
                negatives: self.negatives.len(),
            });
        }
        let mut batch = Vec::with_capacity(batch_size);
        for buf in [&self.positives, &self.negatives] {
            for _ in 0..batch_size / 2 {
                let entry = &buf[rng.gen_range(0..buf.len())];
                let t = &entry.triplets[rng.gen_range(0..entry.triplets.len())];
                batch.push(BatchItem {
                    image: Arc::clone(&entry.image),
                    triplet: t.clone(),
                });
            }
        }
        Ok(batch)
    }

    /// Bytes held by distinct image buffers plus triplet metadata.
    pub fn memory_bytes(&self) -> usize {
        let mut images: Vec<(*const RasterImage, usize)> = self
            .positives
            .iter()
            .chain(&self.negatives)
            .map(|e| (Arc::as_ptr(&e.image), e.image.pixels().len()))
            .collect();
        images.sort_unstable();
        images.dedup();
        let image_bytes: usize = images.iter().map(|&(_, len)| len).sum();
        let meta: usize = self
            .positives
            .iter()
            .chain(&self.negatives)
            .flat_map(|e| &e.triplets)
            .map(|t| {
                std::mem::size_of::<Triplet>()
                    + t.graph.node_count()
                    + t.graph.edge_count() * std::mem::size_of::<crate::graph::Edge>()
            })
            .sum();
        image_bytes + meta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ColoredGraph;
    use rand::SeedableRng;

    fn group(seed: u64, npos: usize, nneg: usize) -> SampleGroup {
        let t = |label| Triplet {
            graph: ColoredGraph::single(0),
            terminal: false,
            label,
        };
        SampleGroup {
            seed,
            target: ColoredGraph::single(0),
            image: Arc::new(RasterImage::white(4, 4)),
            positives: (0..npos).map(|_| t(true)).collect(),
            negatives: (0..nneg).map(|_| t(false)).collect(),
        }
    }

    #[test]
    fn push_and_evict() {
        let mut b = DualBuffer::new(3);
        b.push_group(&group(0, 1, 1)).unwrap();
        assert_eq!(b.sizes(), (1, 1));
        for s in 1..4 {
            b.push_group(&group(s, 1, 2)).unwrap();
        }
        assert_eq!(b.sizes(), (3, 3));
        assert!(b.positives().iter().all(|e| e.seed != 0));
        assert!(b.negatives().iter().all(|e| e.seed != 0));
        assert_eq!(b.positives()[0].seed, 1);
    }

    #[test]
    fn rejects_mislabeled() {
        let mut b = DualBuffer::new(3);
        let mut g = group(0, 1, 1);
        g.negatives[0].label = true;
        assert!(b.push_group(&g).is_err());
        assert!(b.push_group(&group(1, 0, 1)).is_err());
        assert_eq!(b.sizes(), (0, 0));
    }

    #[test]
    fn batch_errors() {
        let b = DualBuffer::new(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample_batch(8, &mut rng), Err(BufferError::NotWarmedUp { .. })));
        assert_eq!(b.sample_batch(7, &mut rng).unwrap_err(), BufferError::OddBatch(7));
    }

    #[test]
    fn balanced_and_reproducible() {
        let mut b = DualBuffer::new(10);
        for s in 0..5 {
            b.push_group(&group(s, 3, 7)).unwrap();
        }
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a = b.sample_batch(8, &mut r1).unwrap();
        let c = b.sample_batch(8, &mut r2).unwrap();
        assert_eq!(a.iter().filter(|x| x.triplet.label).count(), 4);
        let ptrs = |v: &[BatchItem]| v.iter().map(|x| Arc::as_ptr(&x.image)).collect::<Vec<_>>();
        assert_eq!(ptrs(&a), ptrs(&c));
    }

    #[test]
    fn warm_threshold() {
        let mut b = DualBuffer::new(100);
        for s in 0..4 {
            b.push_group(&group(s, 1, 1)).unwrap();
        }
        assert!(!b.is_warm(0.05));
        b.push_group(&group(9, 1, 1)).unwrap();
        assert!(b.is_warm(0.05));
    }
}
