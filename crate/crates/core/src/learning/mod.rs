//! Losses on the assignment matrix and on the edge weights, end-to-end
//! training of per-edge parameters, and the contrast-weight baseline.

mod adam;
mod baseline;
mod loss;
mod params;
mod train;

pub use adam::{AdamConfig, OptimizerState};
pub use baseline::{grady_baseline, grady_weights};
pub use loss::{
    ce_assignment_gradient, ce_assignment_loss, edge_targets, loss_terms, side_weight_loss, total_loss, BackwardMode,
    BackwardOptions, GroundTruth, LossConfig, LossEvaluation, LossTerms, LOG_FLOOR,
};
pub use params::{EdgeParameters, WEIGHT_FLOOR};
pub use train::{train_per_edge, Convergence, TraceRow, TrainConfig, TrainFailure, TrainOutcome};
