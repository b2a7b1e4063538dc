//! The 4-connected image lattice, its edge weights and seeds, and the
//! marked/unmarked block split of the weighted graph Laplacian.
//!
//! Edges are enumerated canonically: first every horizontal edge
//! between `(r, c)` and `(r, c + 1)` in row-major order of its left pixel, then every
//! vertical edge between `(r, c)` and `(r + 1, c)` in row-major order of its upper pixel.
//! Weight files and gradients are indexed in this order.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Position of an edge: its orientation and the coordinates of its upper or
/// left endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeCoord {
    pub orientation: Orientation,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeGraph {
    height: usize,
    width: usize,
    edges: Vec<(usize, usize)>,
}

/// Builds the `height × width` 4-connected lattice with canonical edge order.
pub fn build_lattice(height: usize, width: usize) -> Result<LatticeGraph> {
    LatticeGraph::new(height, width)
}

impl LatticeGraph {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions { height, width });
        }
        let mut edges = Vec::with_capacity(height * (width - 1) + (height - 1) * width);
        for r in 0..height {
            for c in 0..width - 1 {
                let v = r * width + c;
                edges.push((v, v + 1));
            }
        }
        for r in 0..height - 1 {
            for c in 0..width {
                let v = r * width + c;
                edges.push((v, v + width));
            }
        }
        Ok(Self { height, width, edges })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn vertex_count(&self) -> usize {
        self.height * self.width
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn horizontal_count(&self) -> usize {
        self.height * (self.width - 1)
    }

    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v / self.width, v % self.width)
    }

    pub fn vertex(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Index of the horizontal edge whose left pixel is `(row, col)`.
    pub fn horizontal_edge(&self, row: usize, col: usize) -> Option<usize> {
        (row < self.height && col + 1 < self.width).then(|| row * (self.width - 1) + col)
    }

    /// Index of the vertical edge whose upper pixel is `(row, col)`.
    pub fn vertical_edge(&self, row: usize, col: usize) -> Option<usize> {
        (row + 1 < self.height && col < self.width).then(|| self.horizontal_count() + row * self.width + col)
    }

    pub fn edge_coord(&self, e: usize) -> EdgeCoord {
        let h = self.horizontal_count();
        if e < h {
            EdgeCoord {
                orientation: Orientation::Horizontal,
                row: e / (self.width - 1),
                col: e % (self.width - 1),
            }
        } else {
            EdgeCoord {
                orientation: Orientation::Vertical,
                row: (e - h) / self.width,
                col: (e - h) % self.width,
            }
        }
    }

    /// 4-neighbours of `v`.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = self.coords(v);
        let w = self.width;
        [
            (r > 0).then(|| v - w),
            (c > 0).then(|| v - 1),
            (c + 1 < w).then(|| v + 1),
            (r + 1 < self.height).then(|| v + w),
        ]
        .into_iter()
        .flatten()
    }
}

/// One diffusivity per canonical edge. Values must be finite and
/// non-negative; a zero weight removes the edge from the graph.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    values: Vec<f64>,
}

impl EdgeWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((edge, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidWeight { edge, value });
        }
        Ok(Self { values })
    }

    pub fn uniform(edge_count: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; edge_count])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed {
    pub vertex: usize,
    pub label: usize,
}

/// Marked vertices with their labels. Labels form the contiguous range
/// `0..label_count` and each label is used at least once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedSet {
    entries: Vec<Seed>,
    label_count: usize,
}

impl SeedSet {
    pub fn new(entries: Vec<Seed>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidSeeds("at least one seed is required".into()));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for s in &entries {
            if !seen.insert(s.vertex) {
                return Err(Error::InvalidSeeds(format!("vertex {} seeded twice", s.vertex)));
            }
        }
        let label_count = entries.iter().map(|s| s.label).max().unwrap() + 1;
        let mut used = vec![false; label_count];
        for s in &entries {
            used[s.label] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::InvalidSeeds(format!(
                "labels must be contiguous from 0; label {missing} has no seed"
            )));
        }
        Ok(Self { entries, label_count })
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(vertex, label)| Seed { vertex, label }).collect())
    }

    pub fn entries(&self) -> &[Seed] {
        &self.entries
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Where a grid vertex lives in the block-ordered system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockIndex {
    Marked(usize),
    Unmarked(usize),
}

/// The unmarked Laplacian block `L_U` and the coupling `Bᵀ` (unmarked rows ×
/// marked columns), together with the vertex permutation.
///
/// Marked vertices are ordered by grid id. Unmarked vertices are ordered
/// row-major when `width <= height` and column-major otherwise, which keeps
/// the bandwidth of `L_U` at `min(height, width)`.
#[derive(Clone, Debug)]
pub struct LaplacianBlocks {
    graph: LatticeGraph,
    weights: Vec<f64>,
    label_count: usize,
    position: Vec<BlockIndex>,
    marked: Vec<usize>,
    marked_labels: Vec<usize>,
    unmarked: Vec<usize>,
    l_u: CsrMatrix,
    b_t: CsrMatrix,
}

impl LaplacianBlocks {
    pub fn graph(&self) -> &LatticeGraph {
        &self.graph
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn position(&self, v: usize) -> BlockIndex {
        self.position[v]
    }

    /// Grid ids of the marked vertices in block order.
    pub fn marked(&self) -> &[usize] {
        &self.marked
    }

    pub fn marked_labels(&self) -> &[usize] {
        &self.marked_labels
    }

    /// Grid ids of the unmarked vertices in block order.
    pub fn unmarked(&self) -> &[usize] {
        &self.unmarked
    }

    pub fn l_u(&self) -> &CsrMatrix {
        &self.l_u
    }

    pub fn b_t(&self) -> &CsrMatrix {
        &self.b_t
    }

    /// Restricts a `|V| × |ℒ|` row-major matrix (grid order) to the unmarked
    /// rows in block order.
    pub fn restrict_to_unmarked(&self, full: &[f64]) -> Result<Vec<f64>> {
        let l = self.label_count;
        if full.len() != self.graph.vertex_count() * l {
            return Err(Error::ShapeMismatch {
                what: "per-vertex matrix entries",
                expected: self.graph.vertex_count() * l,
                found: full.len(),
            });
        }
        let mut out = Vec::with_capacity(self.unmarked.len() * l);
        for &v in &self.unmarked {
            out.extend_from_slice(&full[v * l..(v + 1) * l]);
        }
        Ok(out)
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Checks that every connected component of the positively weighted graph
/// holds a seed. Returns the smallest vertex of an unseeded component.
fn unseeded_vertex(graph: &LatticeGraph, weights: &[f64], seeds: &SeedSet) -> Option<usize> {
    let mut sets = DisjointSets::new(graph.vertex_count());
    for (&(i, j), &w) in graph.edges().iter().zip(weights) {
        if w > 0.0 {
            sets.union(i, j);
        }
    }
    let mut seeded = vec![false; graph.vertex_count()];
    for s in seeds.entries() {
        let root = sets.find(s.vertex);
        seeded[root] = true;
    }
    (0..graph.vertex_count()).find(|&v| {
        let root = sets.find(v);
        !seeded[root]
    })
}

/// Full graph Laplacian `L = D − A` in grid order.
pub fn laplacian(graph: &LatticeGraph, weights: &EdgeWeights) -> Result<CsrMatrix> {
    check_weights(graph, weights)?;
    let n = graph.vertex_count();
    let mut t = Vec::with_capacity(n + 2 * graph.edge_count());
    for v in 0..n {
        t.push((v, v, 0.0));
    }
    for (&(i, j), &w) in graph.edges().iter().zip(weights.values()) {
        t.push((i, i, w));
        t.push((j, j, w));
        t.push((i, j, -w));
        t.push((j, i, -w));
    }
    Ok(CsrMatrix::from_triplets(n, n, t))
}

fn check_weights(graph: &LatticeGraph, weights: &EdgeWeights) -> Result<()> {
    if weights.len() != graph.edge_count() {
        return Err(Error::ShapeMismatch {
            what: "edge weights",
            expected: graph.edge_count(),
            found: weights.len(),
        });
    }
    Ok(())
}

/// Splits the weighted Laplacian into `L_U` and `Bᵀ` for the given seeds.
///
/// Edges joining two marked vertices contribute to neither block. Fails with
/// [`Error::SingularSystem`] when some component carries no seed.
pub fn assemble_blocks(graph: &LatticeGraph, weights: &EdgeWeights, seeds: &SeedSet) -> Result<LaplacianBlocks> {
    check_weights(graph, weights)?;
    let n = graph.vertex_count();
    if let Some(bad) = seeds.entries().iter().find(|s| s.vertex >= n) {
        return Err(Error::InvalidSeeds(format!(
            "seed vertex {} outside a lattice of {n} vertices",
            bad.vertex
        )));
    }
    if let Some(vertex) = unseeded_vertex(graph, weights.values(), seeds) {
        let (row, col) = graph.coords(vertex);
        return Err(Error::SingularSystem { vertex, row, col });
    }

    let mut label_of = vec![None; n];
    for s in seeds.entries() {
        label_of[s.vertex] = Some(s.label);
    }
    let mut position = vec![BlockIndex::Marked(0); n];
    let mut marked = Vec::with_capacity(seeds.len());
    let mut marked_labels = Vec::with_capacity(seeds.len());
    for (v, label) in label_of.iter().enumerate() {
        if let Some(label) = *label {
            position[v] = BlockIndex::Marked(marked.len());
            marked.push(v);
            marked_labels.push(label);
        }
    }
    let (h, w) = (graph.height(), graph.width());
    let order: Box<dyn Iterator<Item = usize>> = if w <= h {
        Box::new(0..n)
    } else {
        Box::new((0..w).flat_map(move |c| (0..h).map(move |r| r * w + c)))
    };
    let mut unmarked = Vec::with_capacity(n - marked.len());
    for v in order {
        if label_of[v].is_none() {
            position[v] = BlockIndex::Unmarked(unmarked.len());
            unmarked.push(v);
        }
    }

    let mut lu = Vec::with_capacity(unmarked.len() * 5);
    for k in 0..unmarked.len() {
        lu.push((k, k, 0.0));
    }
    let mut bt = Vec::new();
    for (&(i, j), &wt) in graph.edges().iter().zip(weights.values()) {
        match (position[i], position[j]) {
            (BlockIndex::Unmarked(a), BlockIndex::Unmarked(b)) => {
                lu.push((a, a, wt));
                lu.push((b, b, wt));
                lu.push((a, b, -wt));
                lu.push((b, a, -wt));
            }
            (BlockIndex::Unmarked(a), BlockIndex::Marked(m)) | (BlockIndex::Marked(m), BlockIndex::Unmarked(a)) => {
                lu.push((a, a, wt));
                bt.push((a, m, -wt));
            }
            (BlockIndex::Marked(_), BlockIndex::Marked(_)) => {}
        }
    }
    let l_u = CsrMatrix::from_triplets(unmarked.len(), unmarked.len(), lu);
    let b_t = CsrMatrix::from_triplets(unmarked.len(), marked.len(), bt);

    Ok(LaplacianBlocks {
        graph: graph.clone(),
        weights: weights.values().to_vec(),
        label_count: seeds.label_count(),
        position,
        marked,
        marked_labels,
        unmarked,
        l_u,
        b_t,
    })
}
