//! Oracle seeds derived from a ground-truth labeling.
//!
//! Sparse mode picks one pixel per segment, uniformly among the pixels whose
//! Euclidean distance to the segment boundary is at least 60% of the
//! segment's largest such distance. Pixels outside the image count as
//! boundary. Extended mode grows each sparse seed into a disk of half its
//! boundary distance, clipped to the segment.
//!
//! Segment ids are mapped to seed labels by rank: the smallest id becomes
//! label 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::LabelImage;
use crate::lattice::{Seed, SeedSet};

/// Fraction of the maximal interior distance a sparse seed must reach.
pub const INTERIOR_FRACTION: f64 = 0.6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    #[default]
    Sparse,
    Extended,
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            let p = v[k];
            if f[p].is_infinite() {
                // An infinite parabola never wins; replace it outright.
                v[k] = q;
                z[k + 1] = f64::INFINITY;
                break;
            }
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *o = if f[p].is_infinite() {
            f64::INFINITY
        } else {
            (q as f64 - p as f64).powi(2) + f[p]
        };
    }
}

/// Exact squared Euclidean distance transform of a row-major grid where
/// feature pixels hold 0 and all others `f64::INFINITY`.
pub fn squared_distance_transform(grid: &mut [f64], height: usize, width: usize) {
    let n = height.max(width);
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut col = vec![0.0; height];
    let mut out = vec![0.0; n];
    for c in 0..width {
        for r in 0..height {
            col[r] = grid[r * width + c];
        }
        edt_1d(&col, &mut out[..height], &mut v, &mut z);
        for r in 0..height {
            grid[r * width + c] = out[r];
        }
    }
    for r in 0..height {
        let row = &mut grid[r * width..(r + 1) * width];
        let f = row.to_vec();
        edt_1d(&f, &mut out[..width], &mut v, &mut z);
        row.copy_from_slice(&out[..width]);
    }
}

/// Distance from every pixel of the segment to the nearest pixel outside
/// it, as `(vertex, distance)` pairs in row-major order.
fn interior_distances(gt: &LabelImage, id: u32) -> Vec<(usize, f64)> {
    let (h, w) = (gt.height, gt.width);
    let (mut r0, mut r1, mut c0, mut c1) = (h, 0, w, 0);
    for (v, &l) in gt.labels.iter().enumerate() {
        if l == id {
            let (r, c) = (v / w, v % w);
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
        }
    }
    // Bounding box with a one-pixel ring; the ring never belongs to the
    // segment, and nothing beyond it can be closer.
    let (bh, bw) = (r1 - r0 + 3, c1 - c0 + 3);
    let mut grid = vec![0.0; bh * bw];
    for r in r0..=r1 {
        for c in c0..=c1 {
            if gt.get(r, c) == id {
                grid[(r - r0 + 1) * bw + (c - c0 + 1)] = f64::INFINITY;
            }
        }
    }
    squared_distance_transform(&mut grid, bh, bw);
    let mut out = Vec::new();
    for r in r0..=r1 {
        for c in c0..=c1 {
            if gt.get(r, c) == id {
                out.push((r * w + c, grid[(r - r0 + 1) * bw + (c - c0 + 1)].sqrt()));
            }
        }
    }
    out
}

/// Seeds for every segment of `gt`, deterministic in `rng_seed`.
pub fn oracle_seeds(gt: &LabelImage, mode: SeedMode, rng_seed: u64) -> Result<SeedSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut entries = Vec::new();
    for (label, id) in gt.segment_ids().into_iter().enumerate() {
        let dist = interior_distances(gt, id);
        let max = dist.iter().map(|d| d.1).fold(0.0, f64::max);
        let candidates: Vec<_> = dist.iter().filter(|d| d.1 >= INTERIOR_FRACTION * max - 1e-12).collect();
        let &(vertex, d) = candidates[rng.random_range(0..candidates.len())];
        match mode {
            SeedMode::Sparse => entries.push(Seed { vertex, label }),
            SeedMode::Extended => {
                let radius = 0.5 * d;
                let (sr, sc) = ((vertex / gt.width) as f64, (vertex % gt.width) as f64);
                entries.extend(dist.iter().filter_map(|&(v, _)| {
                    let (r, c) = ((v / gt.width) as f64, (v % gt.width) as f64);
                    let inside = (r - sr).powi(2) + (c - sc).powi(2) <= radius * radius;
                    (inside || v == vertex).then_some(Seed { vertex: v, label })
                }));
            }
        }
    }
    entries.sort_unstable();
    SeedSet::new(entries)
}
