//! Sample graphs over the training set and their Laplacians.
//!
//! Edges are unweighted and undirected, stored as `(i, j)` with `i < j` in
//! lexicographic order. That order is also the column order of the
//! incidence matrix.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::TrainingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl SampleGraph {
    /// Validate and canonicalize an edge list. Duplicate edges (in either
    /// orientation) collapse; self-loops and out-of-range vertices are errors.
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::Parameter("graph has no vertices".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::Parameter(format!(
                    "edge ({a},{b}) references a vertex outside 0..{vertex_count}"
                )));
            }
            if a == b {
                return Err(Error::Parameter(format!("self-loop at vertex {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut degrees = vec![0; vertex_count];
        for &(i, j) in &edges {
            degrees[i] += 1;
            degrees[j] += 1;
        }
        Ok(Self {
            vertex_count,
            edges,
            degrees,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Fails with a degree error on the first isolated vertex.
    pub fn require_no_isolated(&self) -> Result<()> {
        match self.degrees.iter().position(|&d| d == 0) {
            Some(vertex) => Err(Error::Degree { vertex }),
            None => Ok(()),
        }
    }

    /// Relabel vertices: vertex `v` becomes `mapping[v]`.
    pub fn relabel(&self, mapping: &[usize]) -> Result<Self> {
        if mapping.len() != self.vertex_count {
            return Err(Error::Parameter(format!(
                "relabeling has {} entries for {} vertices",
                mapping.len(),
                self.vertex_count
            )));
        }
        Self::new(
            self.vertex_count,
            self.edges.iter().map(|&(i, j)| (mapping[i], mapping[j])),
        )
    }
}

/// On-disk adjacency list: `{ "m": int, "edges": [[i, j], ...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub m: usize,
    pub edges: Vec<[usize; 2]>,
}

pub fn load_graph<R: Read>(source: R) -> Result<SampleGraph> {
    let file: GraphFile = serde_json::from_reader(source).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    SampleGraph::new(file.m, file.edges.iter().map(|e| (e[0], e[1])))
}

pub fn load_graph_path(path: &Path) -> Result<SampleGraph> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_graph(file)
}

/// Map a graph whose vertices are source-file row indices onto the
/// reordered positions of `training`.
pub fn align_to_training(graph: &SampleGraph, training: &TrainingSet) -> Result<SampleGraph> {
    if graph.vertex_count() != training.len() {
        return Err(Error::Parameter(format!(
            "graph has {} vertices but the training set has {} samples",
            graph.vertex_count(),
            training.len()
        )));
    }
    graph.relabel(&training.position_of_source())
}

/// Symmetric (union) k-nearest-neighbour graph under Euclidean distance.
/// Equidistant candidates are ranked by lower index.
pub fn build_knn_graph(x: &TrainingSet, k: usize) -> Result<SampleGraph> {
    let m = x.len();
    if k == 0 || k >= m {
        return Err(Error::Parameter(format!("k must satisfy 1 <= k < m = {m}, got {k}")));
    }
    let feats = x.features();
    let dist2 = |a: usize, b: usize| -> f64 {
        feats
            .row(a)
            .iter()
            .zip(feats.row(b).iter())
            .map(|(u, v)| (u - v) * (u - v))
            .sum()
    };
    let mut edges = Vec::with_capacity(m * k);
    for i in 0..m {
        let mut others: Vec<(f64, usize)> = (0..m).filter(|&j| j != i).map(|j| (dist2(i, j), j)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(others.iter().take(k).map(|&(_, j)| (i, j)));
    }
    SampleGraph::new(m, edges)
}

/// Degree-normalized incidence matrix (`m × n`): for edge `e = (i, j)`,
/// `G[i,e] = −1/√d_i` and `G[j,e] = +1/√d_j`. Rows of non-isolated vertices
/// have unit norm.
pub fn incidence_matrix(g: &SampleGraph) -> DMatrix<f64> {
    let m = g.vertex_count();
    let n = g.edge_count();
    let mut out = DMatrix::zeros(m, n);
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        out[(i, e)] = -1.0 / (g.degrees()[i] as f64).sqrt();
        out[(j, e)] = 1.0 / (g.degrees()[j] as f64).sqrt();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianKind {
    Combinatorial,
    Normalized,
}

impl std::str::FromStr for LaplacianKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "combinatorial" => Ok(Self::Combinatorial),
            "normalized" => Ok(Self::Normalized),
            other => Err(Error::Parameter(format!("unknown Laplacian kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    pub matrix: DMatrix<f64>,
    pub kind: LaplacianKind,
}

impl LaplacianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `L = D − G`.
pub fn combinatorial_laplacian(g: &SampleGraph) -> LaplacianMatrix {
    let m = g.vertex_count();
    let mut l = DMatrix::zeros(m, m);
    for (i, &d) in g.degrees().iter().enumerate() {
        l[(i, i)] = d as f64;
    }
    for &(i, j) in g.edges() {
        l[(i, j)] = -1.0;
        l[(j, i)] = -1.0;
    }
    LaplacianMatrix {
        matrix: l,
        kind: LaplacianKind::Combinatorial,
    }
}

/// `L = I − D^{-1/2} G D^{-1/2}`; requires every vertex to have an edge.
pub fn normalized_laplacian(g: &SampleGraph) -> Result<LaplacianMatrix> {
    g.require_no_isolated()?;
    let m = g.vertex_count();
    let mut l = DMatrix::identity(m, m);
    let d = g.degrees();
    for &(i, j) in g.edges() {
        let w = -1.0 / ((d[i] * d[j]) as f64).sqrt();
        l[(i, j)] = w;
        l[(j, i)] = w;
    }
    Ok(LaplacianMatrix {
        matrix: l,
        kind: LaplacianKind::Normalized,
    })
}

pub fn laplacian(g: &SampleGraph, kind: LaplacianKind) -> Result<LaplacianMatrix> {
    match kind {
        LaplacianKind::Combinatorial => Ok(combinatorial_laplacian(g)),
        LaplacianKind::Normalized => normalized_laplacian(g),
    }
}
