use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{AssignmentMatrix, RandomWalker};
use crate::error::{Error, Result};
use crate::gradient::{grad_adjoint, grad_per_edge, GradientReport, GradientRequest, SampleCount};
use crate::image::LabelImage;
use crate::lattice::LatticeGraph;

use super::params::EdgeParameters;

/// Probabilities are clamped to this floor before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Dense one-hot ground truth: the target label of every vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub height: usize,
    pub width: usize,
    pub label_count: usize,
    pub targets: Vec<usize>,
}

impl GroundTruth {
    pub fn new(height: usize, width: usize, label_count: usize, targets: Vec<usize>) -> Result<Self> {
        if targets.len() != height * width {
            return Err(Error::ShapeMismatch {
                what: "ground-truth pixels",
                expected: height * width,
                found: targets.len(),
            });
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= label_count) {
            return Err(Error::InvalidArgument(format!(
                "ground-truth label {t} outside 0..{label_count}"
            )));
        }
        Ok(Self {
            height,
            width,
            label_count,
            targets,
        })
    }

    /// Maps the k-th smallest segment id to label k, the same convention the
    /// oracle seeding uses.
    pub fn from_label_image(gt: &LabelImage) -> Self {
        let ids = gt.segment_ids();
        let targets = gt.labels.iter().map(|l| ids.binary_search(l).unwrap()).collect();
        Self {
            height: gt.height,
            width: gt.width,
            label_count: ids.len(),
            targets,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.targets.len()
    }
}

/// Ground-truth edge labels: 0 where the edge crosses a segment boundary,
/// 1 inside a segment.
pub fn edge_targets(graph: &LatticeGraph, gt: &GroundTruth) -> Result<Vec<f64>> {
    if graph.vertex_count() != gt.vertex_count() {
        return Err(Error::ShapeMismatch {
            what: "ground-truth pixels",
            expected: graph.vertex_count(),
            found: gt.vertex_count(),
        });
    }
    Ok(graph
        .edges()
        .iter()
        .map(|&(i, j)| if gt.targets[i] == gt.targets[j] { 1.0 } else { 0.0 })
        .collect())
}

fn check_assignment_shape(gt: &GroundTruth, z: &AssignmentMatrix) -> Result<()> {
    if z.vertex_count() != gt.vertex_count() || z.label_count != gt.label_count {
        return Err(Error::ShapeMismatch {
            what: "assignment entries",
            expected: gt.vertex_count() * gt.label_count,
            found: z.probabilities.len(),
        });
    }
    Ok(())
}

/// Cross-entropy `−(1/|V|) Σ_i ln Z_{i, t_i}` over all vertices, seeds included.
pub fn ce_assignment_loss(gt: &GroundTruth, z: &AssignmentMatrix) -> Result<f64> {
    check_assignment_shape(gt, z)?;
    let n = gt.vertex_count() as f64;
    Ok(-gt
        .targets
        .iter()
        .enumerate()
        .map(|(i, &t)| z.get(i, t).clamp(LOG_FLOOR, 1.0).ln())
        .sum::<f64>()
        / n)
}

/// `∂CE/∂Z` as a `|V| × |ℒ|` row-major matrix in grid order.
pub fn ce_assignment_gradient(gt: &GroundTruth, z: &AssignmentMatrix) -> Result<Vec<f64>> {
    check_assignment_shape(gt, z)?;
    let n = gt.vertex_count() as f64;
    let l = gt.label_count;
    let mut out = vec![0.0; gt.vertex_count() * l];
    for (i, &t) in gt.targets.iter().enumerate() {
        let p = z.get(i, t);
        if p > LOG_FLOOR && p <= 1.0 {
            out[i * l + t] = -1.0 / (n * p);
        }
    }
    Ok(out)
}

fn clamp_open(w: f64) -> f64 {
    w.clamp(LOG_FLOOR, 1.0 - LOG_FLOOR)
}

fn check_edges(w_star: &[f64], w: &[f64]) -> Result<()> {
    if w_star.len() != w.len() {
        return Err(Error::ShapeMismatch {
            what: "edge weights",
            expected: w_star.len(),
            found: w.len(),
        });
    }
    Ok(())
}

/// Binary cross-entropy between edge labels `w*` and weights `w`, averaged over edges.
pub fn side_weight_loss(w_star: &[f64], w: &[f64]) -> Result<f64> {
    check_edges(w_star, w)?;
    if w.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = w_star
        .iter()
        .zip(w)
        .map(|(&t, &w)| {
            let p = clamp_open(w);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / w.len() as f64)
}

fn side_weight_gradient(w_star: &[f64], w: &[f64]) -> Vec<f64> {
    let m = w.len() as f64;
    w_star
        .iter()
        .zip(w)
        .map(|(&t, &w)| {
            if w <= LOG_FLOOR || w >= 1.0 - LOG_FLOOR {
                0.0
            } else {
                -(t / w - (1.0 - t) / (1.0 - w)) / m
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum LossConfig {
    /// `CE(Z*, Z) + α·CE(w*, w) + (γ/2)‖θ‖²`
    SideCe { alpha: f64, gamma: f64 },
    /// `CE(Z*, Z) − (α / 2|V|)·‖ln w‖₁ + (β/2)‖θ‖²`
    LogBarrier { alpha: f64, beta: f64 },
}

impl LossConfig {
    pub fn side_ce() -> Self {
        Self::SideCe {
            alpha: 1e-2,
            gamma: 1e-5,
        }
    }

    pub fn log_barrier() -> Self {
        Self::LogBarrier {
            alpha: 1e-5,
            beta: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = match *self {
            Self::SideCe { alpha, gamma } => (alpha, gamma),
            Self::LogBarrier { alpha, beta } => (alpha, beta),
        };
        if !(a >= 0.0 && b >= 0.0) {
            return Err(Error::InvalidArgument("loss coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self::side_ce()
    }
}

/// How `∂CE/∂w` is obtained during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BackwardMode {
    /// Exact gradient through the adjoint solves.
    Adjoint,
    /// Exact tangent solves on `n` uniformly sampled edges, zero elsewhere.
    Sampled { n: usize },
    /// As `Sampled`, solving only the dominant label per edge.
    SampledPruned { n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BackwardOptions {
    pub mode: BackwardMode,
    /// Scale sampled entries by `|E| / n`.
    pub rescale: bool,
    pub rng_seed: u64,
}

impl BackwardOptions {
    pub fn exact() -> Self {
        Self {
            mode: BackwardMode::Adjoint,
            rescale: false,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub ce: f64,
    /// Side cross-entropy or log-barrier term, already weighted by α.
    pub side: f64,
    /// Weighted ℓ² decay on θ.
    pub reg: f64,
}

/// Value of the configured loss without any gradient.
pub fn loss_terms(
    gt: &GroundTruth,
    z: &AssignmentMatrix,
    graph: &LatticeGraph,
    params: &EdgeParameters,
    config: &LossConfig,
) -> Result<LossTerms> {
    let ce = ce_assignment_loss(gt, z)?;
    let w = params.weight_values();
    let theta_sq: f64 = params.theta.iter().map(|t| t * t).sum();
    let (side, reg) = match *config {
        LossConfig::SideCe { alpha, gamma } => {
            let w_star = edge_targets(graph, gt)?;
            (alpha * side_weight_loss(&w_star, &w)?, 0.5 * gamma * theta_sq)
        }
        LossConfig::LogBarrier { alpha, beta } => {
            let l1: f64 = w.iter().map(|w| w.ln().abs()).sum();
            (-alpha / (2.0 * gt.vertex_count() as f64) * l1, 0.5 * beta * theta_sq)
        }
    };
    Ok(LossTerms {
        total: ce + side + reg,
        ce,
        side,
        reg,
    })
}

#[derive(Clone, Debug)]
pub struct LossEvaluation {
    pub terms: LossTerms,
    /// `∂l/∂w` in canonical edge order (sampled in the structured part when requested).
    pub grad_weights: Vec<f64>,
    pub grad_theta: Vec<f64>,
    /// Present for the sampled backward modes.
    pub report: Option<GradientReport>,
}

/// Loss value and its gradient with respect to the weights and to θ.
///
/// `z` must be the solution of `walker` for the weights induced by `params`.
pub fn total_loss(
    walker: &RandomWalker<'_>,
    gt: &GroundTruth,
    z: &AssignmentMatrix,
    params: &EdgeParameters,
    config: &LossConfig,
    backward: &BackwardOptions,
) -> Result<LossEvaluation> {
    config.validate()?;
    let graph = walker.blocks().graph();
    let terms = loss_terms(gt, z, graph, params, config)?;
    let dce_dz = ce_assignment_gradient(gt, z)?;
    let dce_dzu = walker.blocks().restrict_to_unmarked(&dce_dz)?;

    let (mut grad_w, report) = match backward.mode {
        BackwardMode::Adjoint => (grad_adjoint(walker, z, &dce_dzu)?, None),
        BackwardMode::Sampled { n } | BackwardMode::SampledPruned { n } => {
            let request = GradientRequest {
                loss_gradient: dce_dzu,
                samples: SampleCount::Count(n),
                pruning: matches!(backward.mode, BackwardMode::SampledPruned { .. }),
                rng_seed: backward.rng_seed,
                rescale: backward.rescale,
            };
            let report = grad_per_edge(walker, z, &request)?;
            (report.grad.clone(), Some(report))
        }
    };

    let w = params.weight_values();
    let decay = match *config {
        LossConfig::SideCe { alpha, gamma } => {
            let w_star = edge_targets(graph, gt)?;
            for (g, s) in grad_w.iter_mut().zip(side_weight_gradient(&w_star, &w)) {
                *g += alpha * s;
            }
            gamma
        }
        LossConfig::LogBarrier { alpha, beta } => {
            let c = -alpha / (2.0 * gt.vertex_count() as f64);
            for (g, &w) in grad_w.iter_mut().zip(&w) {
                let ln = w.ln();
                let sign = if ln > 0.0 {
                    1.0
                } else if ln < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                *g += c * sign / w;
            }
            beta
        }
    };
    let dw = params.weight_derivatives();
    let grad_theta = grad_w
        .iter()
        .zip(&dw)
        .zip(&params.theta)
        .map(|((g, d), t)| g * d + decay * t)
        .collect();
    Ok(LossEvaluation {
        terms,
        grad_weights: grad_w,
        grad_theta,
        report,
    })
}

/// Deterministic stream of per-step sampling seeds.
pub(crate) struct SeedStream(ChaCha8Rng);

impl SeedStream {
    pub(crate) fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub(crate) fn next(&mut self) -> u64 {
        self.0.next_u64()
    }
}
