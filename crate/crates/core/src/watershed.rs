//! Seeded watershed by priority flooding.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::Error;
use crate::image::{FloatImage, LabelImage};
use crate::lattice::{LatticeGraph, SeedSet};

#[derive(Debug, thiserror::Error)]
pub enum WatershedError {
    #[error(transparent)]
    Invalid(#[from] Error),
    /// Some pixels were never reached from a seed. `partial` holds the
    /// flooded labels with `u32::MAX` at unreached pixels.
    #[error("{count} pixels are not reachable from any seed")]
    Unlabeled { count: usize, partial: LabelImage },
}

/// Total order on finite floats for the heap key.
#[derive(Clone, Copy, PartialEq)]
struct Level(f64);

impl Eq for Level {}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Level {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Grows the seeds over `boundary`, always extending the frontier pixel with
/// the lowest boundary value; ties pop in insertion order. A pixel takes the
/// label of the first popped neighbour that reaches it and is never
/// relabeled, so a one-pixel ridge between two basins goes to the side that
/// reaches it first.
pub fn seeded_watershed(boundary: &FloatImage, seeds: &SeedSet) -> Result<LabelImage, WatershedError> {
    let graph = LatticeGraph::new(boundary.height, boundary.width)?;
    if let Some(i) = boundary.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("boundary map value at pixel {i} is not finite")).into());
    }
    let n = graph.vertex_count();
    if let Some(s) = seeds.entries().iter().find(|s| s.vertex >= n) {
        return Err(Error::InvalidSeeds(format!("seed vertex {} outside the image", s.vertex)).into());
    }
    let mut labels = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    let mut counter = 0u64;
    for s in seeds.entries() {
        labels[s.vertex] = s.label as u32;
        heap.push(Reverse((Level(boundary.data[s.vertex]), counter, s.vertex)));
        counter += 1;
    }
    while let Some(Reverse((_, _, v))) = heap.pop() {
        let label = labels[v];
        for u in graph.neighbors(v) {
            if labels[u] == u32::MAX {
                labels[u] = label;
                heap.push(Reverse((Level(boundary.data[u]), counter, u)));
                counter += 1;
            }
        }
    }
    let count = labels.iter().filter(|&&l| l == u32::MAX).count();
    let image = LabelImage {
        height: boundary.height,
        width: boundary.width,
        labels,
    };
    if count > 0 {
        return Err(WatershedError::Unlabeled { count, partial: image });
    }
    Ok(image)
}
