//! Shared fixtures for the benchmarks.

use diffwalker::{
    assemble_blocks, EdgeWeights, LaplacianBlocks, LatticeGraph, RandomWalker, Seed, SeedSet, SolverConfig,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A square lattice with random weights in `[0.1, 2)`, one random seed per
/// label and a random upstream gradient over the unmarked rows.
pub struct Problem {
    pub blocks: LaplacianBlocks,
    pub upstream: Vec<f64>,
}

impl Problem {
    pub fn new(side: usize, labels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graph = LatticeGraph::new(side, side).expect("non-empty lattice");
        let weights = EdgeWeights::new((0..graph.edge_count()).map(|_| rng.random_range(0.1..2.0)).collect())
            .expect("positive weights");
        let entries = sample(&mut rng, graph.vertex_count(), labels)
            .iter()
            .enumerate()
            .map(|(label, vertex)| Seed { vertex, label })
            .collect();
        let seeds = SeedSet::new(entries).expect("distinct seeds");
        let blocks = assemble_blocks(&graph, &weights, &seeds).expect("connected lattice");
        let upstream = (0..blocks.unmarked().len() * labels)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Self { blocks, upstream }
    }

    pub fn walker(&self, config: &SolverConfig) -> RandomWalker<'_> {
        RandomWalker::new(&self.blocks, config).expect("factorizable system")
    }
}
