use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::EdgeWeights;

/// Lower bound of the weight map; keeps every system positive definite.
pub const WEIGHT_FLOOR: f64 = 1e-6;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One free parameter per edge, mapped to a weight in `(ε, 1]` by
/// `w = σ(θ)·(1 − ε) + ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeParameters {
    pub theta: Vec<f64>,
}

impl EdgeParameters {
    /// Every edge starts at the same weight.
    pub fn constant(edge_count: usize, weight: f64) -> Self {
        let s = ((weight - WEIGHT_FLOOR) / (1.0 - WEIGHT_FLOOR)).clamp(1e-15, 1.0 - 1e-15);
        Self {
            theta: vec![(s / (1.0 - s)).ln(); edge_count],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn weight_values(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|&t| sigmoid(t) * (1.0 - WEIGHT_FLOOR) + WEIGHT_FLOOR)
            .collect()
    }

    pub fn weights(&self) -> Result<EdgeWeights> {
        EdgeWeights::new(self.weight_values())
    }

    /// `dw/dθ` per edge.
    pub fn weight_derivatives(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|&t| {
                let s = sigmoid(t);
                (1.0 - WEIGHT_FLOOR) * s * (1.0 - s)
            })
            .collect()
    }
}
