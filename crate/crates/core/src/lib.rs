//! Seeded image segmentation by linear diffusion on a 4-connected lattice,
//! with exact and sampled derivatives of the segmentation with respect to
//! the edge weights.
//!
//! The pipeline: build a [`LatticeGraph`], attach [`EdgeWeights`] and a
//! [`SeedSet`], split the Laplacian with [`assemble_blocks`], solve with
//! [`RandomWalker`], then differentiate a loss through the solve with
//! [`grad_adjoint`] or the sampled [`grad_per_edge`].

pub mod diffusion;
pub mod error;
pub mod gradient;
pub mod image;
pub mod io;
pub mod lattice;
pub mod learning;
pub mod metrics;
pub mod seeding;
pub mod sparse;
pub mod watershed;

pub use diffusion::{entropy_map, label, solve_rw, upsample_assignments, AssignmentMatrix, RandomWalker, SolveReport};
pub use error::{Error, Result};
pub use gradient::{
    grad_adjoint, grad_per_edge, sample_edges, GradientReport, GradientRequest, PrunedChoice, SampleCount,
};
pub use image::{FloatImage, LabelImage};
pub use lattice::{
    assemble_blocks, build_lattice, laplacian, BlockIndex, EdgeWeights, LaplacianBlocks, LatticeGraph, Seed, SeedSet,
};
pub use metrics::{arand, error_map, evaluate, voi, EvalReport};
pub use seeding::{oracle_seeds, SeedMode};
pub use sparse::{SolverConfig, SolverMethod};
pub use watershed::{seeded_watershed, WatershedError};
