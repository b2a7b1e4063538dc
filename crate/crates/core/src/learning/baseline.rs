use crate::diffusion::{solve_rw, AssignmentMatrix};
use crate::error::{Error, Result};
use crate::image::FloatImage;
use crate::lattice::{assemble_blocks, EdgeWeights, LatticeGraph, SeedSet};
use crate::sparse::SolverConfig;

/// Contrast weights `w_ij = exp(−β (I_i − I_j)²)`.
pub fn grady_weights(graph: &LatticeGraph, image: &FloatImage, beta: f64) -> Result<EdgeWeights> {
    if image.height != graph.height() || image.width != graph.width() {
        return Err(Error::ShapeMismatch {
            what: "image pixels",
            expected: graph.vertex_count(),
            found: image.data.len(),
        });
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "beta must be finite and non-negative, got {beta}"
        )));
    }
    EdgeWeights::new(
        graph
            .edges()
            .iter()
            .map(|&(i, j)| (-beta * (image.data[i] - image.data[j]).powi(2)).exp())
            .collect(),
    )
}

/// The classic random walker on intensity-contrast weights.
pub fn grady_baseline(
    image: &FloatImage,
    seeds: &SeedSet,
    beta: f64,
    solver: &SolverConfig,
) -> Result<AssignmentMatrix> {
    let graph = LatticeGraph::new(image.height, image.width)?;
    let weights = grady_weights(&graph, image, beta)?;
    let blocks = assemble_blocks(&graph, &weights, seeds)?;
    Ok(solve_rw(&blocks, solver)?.0)
}
