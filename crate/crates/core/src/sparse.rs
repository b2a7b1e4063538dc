//! Compressed sparse row storage and the two SPD solvers used for the
//! random walker systems: a skyline (envelope) Cholesky factorization and
//! Jacobi-preconditioned conjugate gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compressed-row sparse matrix. Column indices within a row are sorted and
/// unique.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn max_row_nnz(&self) -> usize {
        self.indptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol)
            })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        out
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cholesky factor `A = L Lᵀ` stored by rows over each row's envelope.
///
/// Row `i` of `L` occupies columns `first[i]..=i`, where `first[i]` is the
/// leftmost nonzero of row `i` in `A`. Fill-in never leaves that envelope, so
/// on lattice Laplacians ordered along the shorter image axis the storage is
/// bounded by `n * min(height, width)`.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    row_ptr: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::ShapeMismatch {
                what: "square matrix columns",
                expected: n,
                found: a.ncols(),
            });
        }
        let mut first = Vec::with_capacity(n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for i in 0..n {
            let (cols, _) = a.row(i);
            let f = cols.first().copied().unwrap_or(i).min(i);
            first.push(f);
            row_ptr.push(row_ptr[i] + (i - f + 1));
        }
        let mut data = vec![0.0; row_ptr[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= i {
                    data[row_ptr[i] + c - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let (done, rest) = data.split_at_mut(row_ptr[i]);
            let fi = first[i];
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let row_j = &done[row_ptr[j]..row_ptr[j + 1]];
                let lo = fi.max(fj);
                let s = row_i[j - fi] - dot(&row_i[lo - fi..j - fi], &row_j[lo - fj..j - fj]);
                row_i[j - fi] = s / row_j[j - fj];
            }
            let d = row_i[i - fi] - dot(&row_i[..i - fi], &row_i[..i - fi]);
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::NotPositiveDefinite { row: i, pivot: d });
            }
            row_i[i - fi] = d.sqrt();
        }

        Ok(Self { first, row_ptr, data })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Number of stored entries of the factor.
    pub fn stored(&self) -> usize {
        self.data.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.solve_in_place_from(b, 0);
    }

    /// Solves `A x = b` in place, assuming `b[..start]` is zero so the
    /// forward substitution can skip those rows.
    pub fn solve_in_place_from(&self, b: &mut [f64], start: usize) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        debug_assert!(b[..start.min(n)].iter().all(|&v| v == 0.0));
        for i in start..n {
            let fi = self.first[i].max(start);
            let row = self.row(i);
            let off = self.first[i];
            let s = b[i] - dot(&row[fi - off..i - off], &b[fi..i]);
            b[i] = s / row[i - off];
        }
        for i in (0..n).rev() {
            let row = self.row(i);
            let fi = self.first[i];
            let xi = b[i] / row[i - fi];
            b[i] = xi;
            for (bk, &l) in b[fi..i].iter_mut().zip(&row[..i - fi]) {
                *bk -= l * xi;
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on an SPD matrix.
///
/// Returns the solution and the iteration count, or [`Error::NotConverged`]
/// carrying the achieved relative residual.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.nrows();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 0..max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rel = norm(&r) / b_norm;
        if rel <= rel_tol {
            return Ok((x, it + 1));
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NotConverged {
        residual: rel,
        iterations: max_iter,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    /// Cholesky up to `cg_threshold` unknowns, conjugate gradients above.
    #[default]
    Auto,
    Cholesky,
    ConjugateGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Relative residual target for conjugate gradients.
    pub cg_tolerance: f64,
    /// Iteration cap is this factor times the number of unknowns.
    pub cg_max_iter_factor: usize,
    /// Unknown count above which `Auto` switches to conjugate gradients.
    pub cg_threshold: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            cg_tolerance: 1e-10,
            cg_max_iter_factor: 10,
            cg_threshold: 65_536,
        }
    }
}

/// A prepared solver for one SPD matrix. Read-only after construction, so
/// it can serve many right-hand sides from several threads.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Cholesky(SkylineCholesky),
    ConjugateGradient {
        matrix: CsrMatrix,
        tolerance: f64,
        max_iter: usize,
    },
}

impl SpdSolver {
    pub fn new(a: &CsrMatrix, config: &SolverConfig) -> Result<Self> {
        let direct = match config.method {
            SolverMethod::Cholesky => true,
            SolverMethod::ConjugateGradient => false,
            SolverMethod::Auto => a.nrows() <= config.cg_threshold,
        };
        if direct {
            Ok(Self::Cholesky(SkylineCholesky::factor(a)?))
        } else {
            Ok(Self::ConjugateGradient {
                matrix: a.clone(),
                tolerance: config.cg_tolerance,
                max_iter: config.cg_max_iter_factor.saturating_mul(a.nrows()).max(1),
            })
        }
    }

    pub fn method(&self) -> SolverMethod {
        match self {
            Self::Cholesky(_) => SolverMethod::Cholesky,
            Self::ConjugateGradient { .. } => SolverMethod::ConjugateGradient,
        }
    }

    /// Solves `A x = b`; returns `x` and the iteration count (0 for direct).
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, usize)> {
        match self {
            Self::Cholesky(f) => {
                let mut x = b.to_vec();
                f.solve_in_place(&mut x);
                Ok((x, 0))
            }
            Self::ConjugateGradient {
                matrix,
                tolerance,
                max_iter,
            } => conjugate_gradient(matrix, b, *tolerance, *max_iter),
        }
    }

    /// Solves for a right-hand side given as `(row, value)` pairs; the
    /// direct path skips the all-zero leading rows.
    pub fn solve_sparse(&self, n: usize, entries: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mut b = vec![0.0; n];
        for &(i, v) in entries {
            b[i] += v;
        }
        match self {
            Self::Cholesky(f) => {
                let start = entries.iter().map(|e| e.0).min().unwrap_or(n);
                if start < n {
                    f.solve_in_place_from(&mut b, start);
                }
                Ok(b)
            }
            Self::ConjugateGradient { .. } => self.solve(&b).map(|(x, _)| x),
        }
    }
}
