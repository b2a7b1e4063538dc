#![allow(dead_code)]

use diffwalker::{
    assemble_blocks, AssignmentMatrix, EdgeWeights, LaplacianBlocks, LatticeGraph, RandomWalker, Seed, SeedSet,
    SolverConfig,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub graph: LatticeGraph,
    pub weights: EdgeWeights,
    pub seeds: SeedSet,
}

impl Instance {
    pub fn blocks(&self) -> LaplacianBlocks {
        assemble_blocks(&self.graph, &self.weights, &self.seeds).unwrap()
    }

    pub fn with_weights(&self, values: Vec<f64>) -> Instance {
        Instance {
            graph: self.graph.clone(),
            weights: EdgeWeights::new(values).unwrap(),
            seeds: self.seeds.clone(),
        }
    }

    pub fn solve(&self) -> AssignmentMatrix {
        let blocks = self.blocks();
        let walker = RandomWalker::new(&blocks, &SolverConfig::default()).unwrap();
        walker.solve().unwrap().0
    }
}

/// Random weights in `[0.1, 2]` and `labels` labels spread over 1–2 seeds each.
pub fn random_instance(rng: &mut ChaCha8Rng, height: usize, width: usize, labels: usize) -> Instance {
    let graph = LatticeGraph::new(height, width).unwrap();
    let weights = EdgeWeights::new((0..graph.edge_count()).map(|_| rng.random_range(0.1..2.0)).collect()).unwrap();
    let n = graph.vertex_count();
    let extra = rng.random_range(0..=labels.min(n - labels));
    let picked = sample(rng, n, labels + extra);
    let entries = picked
        .iter()
        .enumerate()
        .map(|(k, vertex)| Seed {
            vertex,
            label: if k < labels { k } else { rng.random_range(0..labels) },
        })
        .collect();
    Instance {
        graph,
        weights,
        seeds: SeedSet::new(entries).unwrap(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense Gaussian elimination with partial pivoting; one right-hand side per column.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            let pivot_row = a[k].clone();
            for (x, p) in a[i][k..].iter_mut().zip(&pivot_row[k..]) {
                *x -= f * p;
            }
            for j in 0..b[i].len() {
                b[i][j] -= f * b[k][j];
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..b[k].len() {
            let s: f64 = (k + 1..n).map(|i| a[k][i] * b[i][j]).sum();
            b[k][j] = (b[k][j] - s) / a[k][k];
        }
    }
    b
}

/// Assignment matrix from a dense solve of the Dirichlet problem, built
/// straight from grid coordinates without the library's assembly.
pub fn dense_oracle(inst: &Instance) -> Vec<Vec<f64>> {
    let (h, w) = (inst.graph.height(), inst.graph.width());
    let n = h * w;
    let labels = inst.seeds.label_count();
    let weights = inst.weights.values();
    let mut full = vec![vec![0.0; n]; n];
    let mut add = |i: usize, j: usize, wt: f64| {
        full[i][j] -= wt;
        full[j][i] -= wt;
        full[i][i] += wt;
        full[j][j] += wt;
    };
    let horizontal = h * (w - 1);
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w {
                add(r * w + c, r * w + c + 1, weights[r * (w - 1) + c]);
            }
            if r + 1 < h {
                add(r * w + c, (r + 1) * w + c, weights[horizontal + r * w + c]);
            }
        }
    }
    let mut seed_label = vec![None; n];
    for s in inst.seeds.entries() {
        seed_label[s.vertex] = Some(s.label);
    }
    let unmarked: Vec<usize> = (0..n).filter(|&v| seed_label[v].is_none()).collect();
    let a: Vec<Vec<f64>> = unmarked
        .iter()
        .map(|&i| unmarked.iter().map(|&j| full[i][j]).collect())
        .collect();
    let b: Vec<Vec<f64>> = unmarked
        .iter()
        .map(|&i| {
            let mut rhs = vec![0.0; labels];
            for (j, l) in seed_label.iter().enumerate() {
                if let Some(l) = l {
                    rhs[*l] -= full[i][j];
                }
            }
            rhs
        })
        .collect();
    let x = dense_solve(a, b);
    let mut z = vec![vec![0.0; labels]; n];
    for (k, &v) in unmarked.iter().enumerate() {
        z[v] = x[k].clone();
    }
    for (v, l) in seed_label.iter().enumerate() {
        if let Some(l) = l {
            z[v][*l] = 1.0;
        }
    }
    z
}

/// Random `|V| × |ℒ|` upstream gradient in grid order.
pub fn random_upstream(rng: &mut ChaCha8Rng, vertices: usize, labels: usize) -> Vec<f64> {
    (0..vertices * labels).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `Σ G ⊙ Z` over all vertices; its derivative with respect to `Z_U` is `G`
/// restricted to the unmarked rows.
pub fn linear_functional(g: &[f64], z: &AssignmentMatrix) -> f64 {
    g.iter().zip(&z.probabilities).map(|(a, b)| a * b).sum()
}

/// Central finite differences of `Σ G ⊙ Z` with respect to every weight.
pub fn finite_difference_gradient(inst: &Instance, g: &[f64], step: f64) -> Vec<f64> {
    let base = inst.weights.values().to_vec();
    (0..base.len())
        .map(|e| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[e] += step;
            minus[e] -= step;
            let lp = linear_functional(g, &inst.with_weights(plus).solve());
            let lm = linear_functional(g, &inst.with_weights(minus).solve());
            (lp - lm) / (2.0 * step)
        })
        .collect()
}

pub fn relative_error(approx: &[f64], exact: &[f64]) -> f64 {
    let diff: f64 = approx
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = exact.iter().map(|b| b * b).sum::<f64>().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}
