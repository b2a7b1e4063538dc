//! Solving the random walker system `L_U Z_U = −Bᵀ Z_M` and the per-pixel
//! products derived from the assignment matrix.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{FloatImage, LabelImage};
use crate::lattice::{BlockIndex, LaplacianBlocks};
use crate::sparse::{SolverConfig, SolverMethod, SpdSolver};

/// Row-stochastic `|V| × |ℒ|` label probabilities, row-major by grid vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentMatrix {
    pub height: usize,
    pub width: usize,
    pub label_count: usize,
    pub probabilities: Vec<f64>,
}

impl AssignmentMatrix {
    pub fn new(height: usize, width: usize, label_count: usize, probabilities: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { height, width });
        }
        if label_count == 0 || probabilities.len() != height * width * label_count {
            return Err(Error::ShapeMismatch {
                what: "assignment entries",
                expected: height * width * label_count,
                found: probabilities.len(),
            });
        }
        Ok(Self {
            height,
            width,
            label_count,
            probabilities,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.height * self.width
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.probabilities[v * self.label_count..(v + 1) * self.label_count]
    }

    pub fn get(&self, v: usize, label: usize) -> f64 {
        self.probabilities[v * self.label_count + label]
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        self.probabilities
            .chunks(self.label_count)
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolverMethod,
    pub unknowns: usize,
    /// Relative residual `‖L_U z − b‖ / ‖b‖` per label column (absolute when `b = 0`).
    pub residual_norms: Vec<f64>,
    /// Conjugate-gradient iterations per label column; zero for the direct solver.
    pub iterations: Vec<usize>,
    /// Stored entries of the Cholesky factor, zero for conjugate gradients.
    pub factor_entries: usize,
    pub max_row_sum_error: f64,
    /// Not serialized, so report files stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// A factorized random walker system, reusable for the forward solve and
/// every backward solve.
pub struct RandomWalker<'a> {
    blocks: &'a LaplacianBlocks,
    solver: SpdSolver,
    setup_time: Duration,
}

impl<'a> RandomWalker<'a> {
    pub fn new(blocks: &'a LaplacianBlocks, config: &SolverConfig) -> Result<Self> {
        let start = Instant::now();
        let solver = SpdSolver::new(blocks.l_u(), config)?;
        Ok(Self {
            blocks,
            solver,
            setup_time: start.elapsed(),
        })
    }

    pub fn blocks(&self) -> &'a LaplacianBlocks {
        self.blocks
    }

    pub fn solver(&self) -> &SpdSolver {
        &self.solver
    }

    /// `−Bᵀ Z_M` column for `label`, in unmarked block order.
    fn rhs(&self, label: usize) -> Vec<f64> {
        let b_t = self.blocks.b_t();
        let labels = self.blocks.marked_labels();
        (0..b_t.nrows())
            .map(|i| {
                let (cols, vals) = b_t.row(i);
                -cols
                    .iter()
                    .zip(vals)
                    .filter(|(&m, _)| labels[m] == label)
                    .map(|(_, &v)| v)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Solves every label column and assembles the full assignment matrix.
    pub fn solve(&self) -> Result<(AssignmentMatrix, SolveReport)> {
        let start = Instant::now();
        let blocks = self.blocks;
        let n_u = blocks.unmarked().len();
        let labels = blocks.label_count();
        let l_u = blocks.l_u();
        let columns = (0..labels)
            .into_par_iter()
            .map(|a| {
                let b = self.rhs(a);
                let (z, iters) = self.solver.solve(&b)?;
                let mut lz = vec![0.0; n_u];
                l_u.mul_vec(&z, &mut lz);
                let res: f64 = lz.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                let rel = if b_norm > 0.0 { res / b_norm } else { res };
                Ok((z, iters, rel))
            })
            .collect::<Result<Vec<_>>>()?;

        let graph = blocks.graph();
        let mut probabilities = vec![0.0; graph.vertex_count() * labels];
        for (&v, &label) in blocks.marked().iter().zip(blocks.marked_labels()) {
            probabilities[v * labels + label] = 1.0;
        }
        for (k, &v) in blocks.unmarked().iter().enumerate() {
            for (a, col) in columns.iter().enumerate() {
                probabilities[v * labels + a] = col.0[k];
            }
        }
        let z = AssignmentMatrix::new(graph.height(), graph.width(), labels, probabilities)?;
        let max_row_sum_error = z.max_row_sum_error();
        if max_row_sum_error > 1e-6 {
            log::warn!("assignment rows deviate from 1 by {max_row_sum_error:e}; solver accuracy is suspect");
        }
        let report = SolveReport {
            method: self.solver.method(),
            unknowns: n_u,
            residual_norms: columns.iter().map(|c| c.2).collect(),
            iterations: columns.iter().map(|c| c.1).collect(),
            factor_entries: match &self.solver {
                SpdSolver::Cholesky(f) => f.stored(),
                SpdSolver::ConjugateGradient { .. } => 0,
            },
            max_row_sum_error,
            wall_time: self.setup_time + start.elapsed(),
        };
        Ok((z, report))
    }

    /// `Z_U` in unmarked block order, `|U| × |ℒ|` row-major.
    pub fn unmarked_rows(&self, z: &AssignmentMatrix) -> Vec<f64> {
        let l = z.label_count;
        self.blocks
            .unmarked()
            .iter()
            .flat_map(|&v| z.probabilities[v * l..(v + 1) * l].iter().copied())
            .collect()
    }

    pub fn is_marked(&self, v: usize) -> bool {
        matches!(self.blocks.position(v), BlockIndex::Marked(_))
    }
}

/// Factorizes and solves the random walker system in one call.
pub fn solve_rw(blocks: &LaplacianBlocks, config: &SolverConfig) -> Result<(AssignmentMatrix, SolveReport)> {
    RandomWalker::new(blocks, config)?.solve()
}

/// Winner-take-all labeling; ties go to the lowest label id.
pub fn label(assignments: &AssignmentMatrix) -> LabelImage {
    let labels = assignments
        .probabilities
        .chunks(assignments.label_count)
        .map(|row| {
            let mut best = 0;
            for (a, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = a;
                }
            }
            best as u32
        })
        .collect();
    LabelImage {
        height: assignments.height,
        width: assignments.width,
        labels,
    }
}

/// Per-pixel Shannon entropy in nats, with `0 · ln 0 = 0`.
pub fn entropy_map(assignments: &AssignmentMatrix) -> FloatImage {
    let data = assignments
        .probabilities
        .chunks(assignments.label_count)
        .map(|row| -row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>())
        .collect();
    FloatImage {
        height: assignments.height,
        width: assignments.width,
        data,
    }
}

/// Source coordinate and interpolation weight of the upper neighbour for a
/// factor-2 upsampling with pixel centres aligned (half-pixel convention,
/// edges clamped).
fn upsample_taps(target: usize, source_len: usize) -> (usize, usize, f64) {
    let s = ((target as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (source_len - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(source_len - 1);
    (lo, hi, s - lo as f64)
}

/// Bilinear factor-2 upsampling of every label channel followed by row
/// renormalization.
pub fn upsample_assignments(
    assignments: &AssignmentMatrix,
    target_height: usize,
    target_width: usize,
) -> Result<AssignmentMatrix> {
    let (h, w, l) = (assignments.height, assignments.width, assignments.label_count);
    if target_height != 2 * h || target_width != 2 * w {
        return Err(Error::InvalidArgument(format!(
            "upsampling target {target_height}x{target_width} is not twice {h}x{w}"
        )));
    }
    let rows: Vec<_> = (0..target_height).map(|y| upsample_taps(y, h)).collect();
    let cols: Vec<_> = (0..target_width).map(|x| upsample_taps(x, w)).collect();
    let mut out = Vec::with_capacity(target_height * target_width * l);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let start = out.len();
            for a in 0..l {
                let p = |y: usize, x: usize| assignments.probabilities[(y * w + x) * l + a];
                let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
                let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
            let sum: f64 = out[start..].iter().sum();
            if sum > 0.0 {
                out[start..].iter_mut().for_each(|v| *v /= sum);
            }
        }
    }
    AssignmentMatrix::new(target_height, target_width, l, out)
}
