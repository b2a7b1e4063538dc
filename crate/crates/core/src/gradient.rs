//! Derivatives of a loss on the assignment matrix with respect to the edge
//! weights.
//!
//! Differentiating `L_U Z_U = −Bᵀ Z_M` by the weight of edge `e = (i, j)`
//! gives `L_U ∂Z_U/∂w_e = −(∂L/∂w_e · Z)|_U`, whose right-hand side is
//! `−(Z_i − Z_j)` on row `i` and `−(Z_j − Z_i)` on row `j` (rows of marked
//! endpoints are dropped). Two routes evaluate `∂l/∂w`:
//!
//! * [`grad_per_edge`] solves that system for each requested edge and
//!   contracts the result with `∂l/∂Z_U`. The right-hand sides of all labels
//!   are multiples of `e_j − e_i`, so each edge costs a single solve. It supports uniform edge sampling
//!   and pruning to the single dominant label.
//! * [`grad_adjoint`] solves `L_U λ_a = (∂l/∂Z_U)_{:,a}` once per label and
//!   reads every edge derivative off `λ`.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{AssignmentMatrix, RandomWalker};
use crate::error::{Error, Result};
use crate::lattice::BlockIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleCount {
    All,
    Count(usize),
}

/// Edges sampled per backward pass when none is configured.
pub const DEFAULT_SAMPLES: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct GradientRequest {
    /// `∂l/∂Z_U`, `|U| × |ℒ|` row-major in unmarked block order.
    pub loss_gradient: Vec<f64>,
    pub samples: SampleCount,
    pub pruning: bool,
    pub rng_seed: u64,
    /// Multiply sampled entries by `|E| / n`, which makes the estimate
    /// unbiased. Off by default.
    pub rescale: bool,
}

impl GradientRequest {
    pub fn exact(loss_gradient: Vec<f64>) -> Self {
        Self {
            loss_gradient,
            samples: SampleCount::All,
            pruning: false,
            rng_seed: 0,
            rescale: false,
        }
    }
}

/// Endpoint and label chosen for a pruned edge solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunedChoice {
    pub vertex: usize,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    /// `∂l/∂w` in canonical edge order; zero at unsampled edges.
    pub grad: Vec<f64>,
    /// Sampled edge ids in increasing order.
    pub sampled_edges: Vec<usize>,
    /// Parallel to `sampled_edges` when pruning is on, empty otherwise.
    /// `None` for edges with no unmarked endpoint.
    pub pruned: Vec<Option<PrunedChoice>>,
    /// Linear solves performed.
    pub solves: usize,
}

/// Draws `n` distinct edge ids uniformly without replacement, returned in
/// increasing order. The same `rng_seed` always yields the same sample.
pub fn sample_edges(edge_count: usize, n: usize, rng_seed: u64) -> Result<Vec<usize>> {
    if n > edge_count {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {n} edges from {edge_count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut ids = index::sample(&mut rng, edge_count, n).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

fn check_loss_gradient(walker: &RandomWalker<'_>, loss_gradient: &[f64]) -> Result<()> {
    let blocks = walker.blocks();
    let expected = blocks.unmarked().len() * blocks.label_count();
    if loss_gradient.len() != expected {
        return Err(Error::ShapeMismatch {
            what: "loss gradient entries (|U| x |L|)",
            expected,
            found: loss_gradient.len(),
        });
    }
    Ok(())
}

fn unmarked_index(walker: &RandomWalker<'_>, v: usize) -> Option<usize> {
    match walker.blocks().position(v) {
        BlockIndex::Unmarked(k) => Some(k),
        BlockIndex::Marked(_) => None,
    }
}

/// Largest `|g|` in a row and its (lowest) label.
fn dominant_label(row: &[f64]) -> (usize, f64) {
    let mut best = (0, row[0].abs());
    for (a, g) in row.iter().enumerate().skip(1) {
        if g.abs() > best.1 {
            best = (a, g.abs());
        }
    }
    best
}

/// Per-edge derivative via the tangent system of each sampled edge.
///
/// With pruning on, only the label with the largest `|∂l/∂Z_U|` at one
/// endpoint contributes. When both endpoints are unmarked the endpoint whose
/// dominant entry is larger is used (the first endpoint on ties).
pub fn grad_per_edge(
    walker: &RandomWalker<'_>,
    assignments: &AssignmentMatrix,
    request: &GradientRequest,
) -> Result<GradientReport> {
    check_loss_gradient(walker, &request.loss_gradient)?;
    let blocks = walker.blocks();
    let graph = blocks.graph();
    let edge_count = graph.edge_count();
    let labels = blocks.label_count();
    let n_u = blocks.unmarked().len();
    let g = &request.loss_gradient;

    let sampled_edges = match request.samples {
        SampleCount::All => (0..edge_count).collect(),
        SampleCount::Count(n) => sample_edges(edge_count, n, request.rng_seed)?,
    };

    let per_edge = sampled_edges
        .par_iter()
        .map(|&e| -> Result<(f64, Option<PrunedChoice>, usize)> {
            let (i, j) = graph.edge(e);
            let (ki, kj) = (unmarked_index(walker, i), unmarked_index(walker, j));
            if ki.is_none() && kj.is_none() {
                return Ok((0.0, None, 0));
            }
            let (label_range, choice) = if request.pruning {
                let pick = |k: usize| dominant_label(&g[k * labels..(k + 1) * labels]);
                let (vertex, k) = match (ki, kj) {
                    (Some(a), Some(b)) if pick(b).1 > pick(a).1 => (j, b),
                    (Some(a), _) => (i, a),
                    (None, Some(b)) => (j, b),
                    (None, None) => unreachable!(),
                };
                let label = pick(k).0;
                (label..label + 1, Some(PrunedChoice { vertex, label }))
            } else {
                (0..labels, None)
            };

            // The tangent right-hand side of label a is (Z_ia − Z_ja)(e_j − e_i)
            // on the unmarked rows, so one solve serves every label.
            let diffs: Vec<(usize, f64)> = label_range
                .map(|a| (a, assignments.get(i, a) - assignments.get(j, a)))
                .filter(|&(_, d)| d != 0.0)
                .collect();
            if diffs.is_empty() {
                return Ok((0.0, choice, 0));
            }
            let mut rhs = Vec::with_capacity(2);
            if let Some(k) = ki {
                rhs.push((k, -1.0));
            }
            if let Some(k) = kj {
                rhs.push((k, 1.0));
            }
            let x = walker.solver().solve_sparse(n_u, &rhs)?;
            let value = x
                .iter()
                .enumerate()
                .map(|(k, v)| v * diffs.iter().map(|&(a, d)| d * g[k * labels + a]).sum::<f64>())
                .sum();
            Ok((value, choice, 1))
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = match (request.rescale, request.samples) {
        (true, SampleCount::Count(n)) if n > 0 => edge_count as f64 / n as f64,
        _ => 1.0,
    };
    let mut grad = vec![0.0; edge_count];
    let mut pruned = Vec::new();
    let mut solves = 0;
    for (&e, &(value, choice, s)) in sampled_edges.iter().zip(&per_edge) {
        grad[e] = value * scale;
        solves += s;
        if request.pruning {
            pruned.push(choice);
        }
    }
    Ok(GradientReport {
        grad,
        sampled_edges,
        pruned,
        solves,
    })
}

/// Full edge gradient with one adjoint solve per label.
pub fn grad_adjoint(
    walker: &RandomWalker<'_>,
    assignments: &AssignmentMatrix,
    loss_gradient: &[f64],
) -> Result<Vec<f64>> {
    check_loss_gradient(walker, loss_gradient)?;
    let blocks = walker.blocks();
    let labels = blocks.label_count();
    let n_u = blocks.unmarked().len();

    // λ_a = L_U⁻¹ (∂l/∂Z_U)_{:,a}; L_U is symmetric.
    let adjoints = (0..labels)
        .into_par_iter()
        .map(|a| {
            let col: Vec<f64> = (0..n_u).map(|k| loss_gradient[k * labels + a]).collect();
            walker.solver().solve(&col).map(|(x, _)| x)
        })
        .collect::<Result<Vec<_>>>()?;

    let lambda = |v: usize, a: usize| unmarked_index(walker, v).map_or(0.0, |k| adjoints[a][k]);
    Ok(blocks
        .graph()
        .edges()
        .iter()
        .map(|&(i, j)| {
            -(0..labels)
                .map(|a| (lambda(i, a) - lambda(j, a)) * (assignments.get(i, a) - assignments.get(j, a)))
                .sum::<f64>()
        })
        .collect())
}
