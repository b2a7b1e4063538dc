//! Partition comparison: variation of information, adjusted Rand error and
//! error maps.
//!
//! Both scores ignore pixels near ground-truth boundaries. A pixel is a
//! boundary pixel when one of its 4-neighbours carries another ground-truth
//! label; with tolerance `t > 0` every pixel within Chebyshev distance
//! `t − 1` of a boundary pixel is excluded. Tolerance 0 keeps every pixel,
//! tolerance 1 drops the boundary pixels on both sides, tolerance 2 (the
//! default) also drops their 8-neighbours.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::LabelImage;

/// Boundary tolerance in pixels used when none is given.
pub const DEFAULT_TOLERANCE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `H(pred | gt)` in nats.
    pub voi_split: f64,
    /// `H(gt | pred)` in nats.
    pub voi_merge: f64,
    pub voi_total: f64,
    pub arand: f64,
    pub excluded_pixels: usize,
}

/// Pixels excluded from evaluation for the given tolerance.
pub fn tolerance_mask(gt: &LabelImage, tolerance: usize) -> Vec<bool> {
    let (h, w) = (gt.height, gt.width);
    let mut excluded = vec![false; h * w];
    if tolerance == 0 {
        return excluded;
    }
    let reach = tolerance - 1;
    for r in 0..h {
        for c in 0..w {
            let l = gt.get(r, c);
            let boundary = (r > 0 && gt.get(r - 1, c) != l)
                || (r + 1 < h && gt.get(r + 1, c) != l)
                || (c > 0 && gt.get(r, c - 1) != l)
                || (c + 1 < w && gt.get(r, c + 1) != l);
            if boundary {
                for rr in r.saturating_sub(reach)..=(r + reach).min(h - 1) {
                    for cc in c.saturating_sub(reach)..=(c + reach).min(w - 1) {
                        excluded[rr * w + cc] = true;
                    }
                }
            }
        }
    }
    excluded
}

struct Contingency {
    total: f64,
    joint: BTreeMap<(u32, u32), usize>,
    pred: BTreeMap<u32, usize>,
    gt: BTreeMap<u32, usize>,
    excluded: usize,
}

fn contingency(pred: &LabelImage, gt: &LabelImage, tolerance: usize) -> Result<Contingency> {
    gt.same_shape(pred)?;
    let mask = tolerance_mask(gt, tolerance);
    let mut table = Contingency {
        total: 0.0,
        joint: BTreeMap::new(),
        pred: BTreeMap::new(),
        gt: BTreeMap::new(),
        excluded: 0,
    };
    let mut kept = 0usize;
    for ((&p, &g), &skip) in pred.labels.iter().zip(&gt.labels).zip(&mask) {
        if skip {
            table.excluded += 1;
            continue;
        }
        kept += 1;
        *table.joint.entry((p, g)).or_default() += 1;
        *table.pred.entry(p).or_default() += 1;
        *table.gt.entry(g).or_default() += 1;
    }
    if kept == 0 {
        return Err(Error::InvalidArgument(
            "every pixel falls inside the boundary tolerance band".into(),
        ));
    }
    table.total = kept as f64;
    Ok(table)
}

/// `H(A | B)` where `of` picks the conditioned label `a` from a joint key and
/// `given` holds the counts of `b`. Each term is `n_ab · ln(n_ab / n_b)`, so a
/// partition conditioned on itself is exactly zero.
fn conditional_entropy(table: &Contingency, given: &BTreeMap<u32, usize>, pick: fn(&(u32, u32)) -> u32) -> f64 {
    let sum: f64 = table
        .joint
        .iter()
        .map(|(key, &c)| {
            let c = c as f64;
            c * (c / given[&pick(key)] as f64).ln()
        })
        .sum();
    (-sum / table.total).max(0.0)
}

fn split_merge(table: &Contingency) -> (f64, f64) {
    let split = conditional_entropy(table, &table.gt, |&(_, g)| g);
    let merge = conditional_entropy(table, &table.pred, |&(p, _)| p);
    (split, merge)
}

/// `(split, merge) = (H(pred | gt), H(gt | pred))` in nats.
pub fn voi(pred: &LabelImage, gt: &LabelImage, tolerance: usize) -> Result<(f64, f64)> {
    let table = contingency(pred, gt, tolerance)?;
    Ok(split_merge(&table))
}

fn pairs(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// `1 − ARI` over the tolerance-filtered pixels.
pub fn arand(pred: &LabelImage, gt: &LabelImage, tolerance: usize) -> Result<f64> {
    let table = contingency(pred, gt, tolerance)?;
    Ok(1.0 - adjusted_rand_index(&table))
}

fn adjusted_rand_index(table: &Contingency) -> f64 {
    let n = table.total as usize;
    let sum_joint: f64 = table.joint.values().map(|&c| pairs(c)).sum();
    let sum_pred: f64 = table.pred.values().map(|&c| pairs(c)).sum();
    let sum_gt: f64 = table.gt.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_pred * sum_gt / total;
    let max_index = 0.5 * (sum_pred + sum_gt);
    let denom = max_index - expected;
    if denom == 0.0 {
        // Both partitions trivial (single cluster or all singletons).
        return if sum_joint == max_index { 1.0 } else { 0.0 };
    }
    (sum_joint - expected) / denom
}

pub fn evaluate(pred: &LabelImage, gt: &LabelImage, tolerance: usize) -> Result<EvalReport> {
    let table = contingency(pred, gt, tolerance)?;
    let (voi_split, voi_merge) = split_merge(&table);
    Ok(EvalReport {
        voi_split,
        voi_merge,
        voi_total: voi_split + voi_merge,
        arand: 1.0 - adjusted_rand_index(&table),
        excluded_pixels: table.excluded,
    })
}

/// Marks pixels whose prediction disagrees with the ground truth after
/// matching every predicted segment to the ground-truth segment it overlaps
/// most (lowest id on ties).
pub fn error_map(pred: &LabelImage, gt: &LabelImage) -> Result<Vec<bool>> {
    gt.same_shape(pred)?;
    let mut overlap: HashMap<u32, HashMap<u32, usize>> = HashMap::new();
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        *overlap.entry(p).or_default().entry(g).or_default() += 1;
    }
    let matched: HashMap<u32, u32> = overlap
        .into_iter()
        .map(|(p, counts)| {
            let best = counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(g, _)| g)
                .unwrap();
            (p, best)
        })
        .collect();
    Ok(pred
        .labels
        .iter()
        .zip(&gt.labels)
        .map(|(p, &g)| matched[p] != g)
        .collect())
}
