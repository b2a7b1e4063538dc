use serde::{Deserialize, Serialize};

use crate::diffusion::{label, AssignmentMatrix, RandomWalker};
use crate::error::{Error, Result};
use crate::image::LabelImage;
use crate::lattice::{assemble_blocks, LatticeGraph, SeedSet};
use crate::sparse::SolverConfig;

use super::adam::{AdamConfig, OptimizerState};
use super::loss::{total_loss, BackwardMode, BackwardOptions, GroundTruth, LossConfig, LossTerms, SeedStream};
use super::params::EdgeParameters;

/// Stop once `|L_t − L_{t−window}| < rel_tol · |L_{t−window}|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub rel_tol: f64,
    pub window: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            window: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub adam: AdamConfig,
    /// Optimizer step cap.
    pub epochs: usize,
    pub backward: BackwardMode,
    pub rescale: bool,
    pub rng_seed: u64,
    pub solver: SolverConfig,
    pub convergence: Option<Convergence>,
    /// Weight every edge starts from.
    pub initial_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::side_ce(),
            adam: AdamConfig::default(),
            epochs: 500,
            backward: BackwardMode::Adjoint,
            rescale: false,
            rng_seed: 0,
            solver: SolverConfig::default(),
            convergence: Some(Convergence::default()),
            initial_weight: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub ce: f64,
    pub side: f64,
    pub reg: f64,
}

impl TraceRow {
    fn new(step: usize, t: LossTerms) -> Self {
        Self {
            step,
            loss: t.total,
            ce: t.ce,
            side: t.side,
            reg: t.reg,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: EdgeParameters,
    /// Loss before each optimizer step.
    pub trace: Vec<TraceRow>,
    pub assignments: AssignmentMatrix,
    pub segmentation: LabelImage,
    pub converged: bool,
}

/// A training run that hit a solver or validation error. Keeps the trace
/// and the parameters reached so far.
#[derive(Debug, thiserror::Error)]
#[error("training aborted at step {step}: {source}")]
pub struct TrainFailure {
    pub step: usize,
    #[source]
    pub source: Error,
    pub trace: Vec<TraceRow>,
    pub params: EdgeParameters,
}

fn check_config(graph: &LatticeGraph, gt: &GroundTruth, seeds: &SeedSet, config: &TrainConfig) -> Result<()> {
    config.loss.validate()?;
    if gt.vertex_count() != graph.vertex_count() {
        return Err(Error::ShapeMismatch {
            what: "ground-truth pixels",
            expected: graph.vertex_count(),
            found: gt.vertex_count(),
        });
    }
    if gt.label_count != seeds.label_count() {
        return Err(Error::InvalidArgument(format!(
            "ground truth has {} labels but seeds use {}",
            gt.label_count,
            seeds.label_count()
        )));
    }
    if let BackwardMode::Sampled { n } | BackwardMode::SampledPruned { n } = config.backward {
        if n > graph.edge_count() {
            return Err(Error::InvalidArgument(format!(
                "sample count {n} exceeds the {} edges of the lattice",
                graph.edge_count()
            )));
        }
    }
    if !(config.initial_weight > 0.0 && config.initial_weight <= 1.0) {
        return Err(Error::InvalidArgument("initial weight must lie in (0, 1]".into()));
    }
    Ok(())
}

fn forward(
    graph: &LatticeGraph,
    seeds: &SeedSet,
    params: &EdgeParameters,
    solver: &SolverConfig,
) -> Result<AssignmentMatrix> {
    let weights = params.weights()?;
    let blocks = assemble_blocks(graph, &weights, seeds)?;
    Ok(RandomWalker::new(&blocks, solver)?.solve()?.0)
}

/// Fits one parameter per edge to a single ground-truth labeling with Adam.
pub fn train_per_edge(
    graph: &LatticeGraph,
    gt: &GroundTruth,
    seeds: &SeedSet,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainFailure> {
    let mut params = EdgeParameters::constant(graph.edge_count(), config.initial_weight);
    let mut trace = Vec::new();
    let fail = |step, source, trace: Vec<TraceRow>, params: EdgeParameters| TrainFailure {
        step,
        source,
        trace,
        params,
    };
    if let Err(e) = check_config(graph, gt, seeds, config) {
        return Err(fail(0, e, trace, params));
    }

    let mut optimizer = OptimizerState::new(params.len(), config.adam);
    let mut seeds_stream = SeedStream::new(config.rng_seed);
    let mut converged = false;
    for step in 0..config.epochs {
        let sample_seed = seeds_stream.next();
        let evaluation = (|| {
            let weights = params.weights()?;
            debug_assert!(weights.values().iter().all(|&w| w > 0.0));
            let blocks = assemble_blocks(graph, &weights, seeds)?;
            let walker = RandomWalker::new(&blocks, &config.solver)?;
            let (z, _) = walker.solve()?;
            let backward = BackwardOptions {
                mode: config.backward,
                rescale: config.rescale,
                rng_seed: sample_seed,
            };
            total_loss(&walker, gt, &z, &params, &config.loss, &backward)
        })();
        let evaluation = match evaluation {
            Ok(e) => e,
            Err(e) => return Err(fail(step, e, trace, params)),
        };
        trace.push(TraceRow::new(step, evaluation.terms));
        if let Some(rule) = config.convergence {
            if step >= rule.window {
                let then = trace[step - rule.window].loss;
                if (evaluation.terms.total - then).abs() < rule.rel_tol * then.abs() {
                    converged = true;
                    break;
                }
            }
        }
        optimizer.step(&mut params.theta, &evaluation.grad_theta);
        log::debug!("step {step}: loss {:.6e}", evaluation.terms.total);
    }

    let assignments = match forward(graph, seeds, &params, &config.solver) {
        Ok(z) => z,
        Err(e) => return Err(fail(trace.len(), e, trace, params)),
    };
    let segmentation = label(&assignments);
    Ok(TrainOutcome {
        params,
        trace,
        assignments,
        segmentation,
        converged,
    })
}
