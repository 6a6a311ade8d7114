//! Graphs, dense adjacency and the two adjacency normalizations.
//!
//! Both normalizations start from `M = A + Aᵀ + I`. The degree-normalized
//! variant rescales it symmetrically by the row sums of `M` itself, which are
//! always at least 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

impl From<(usize, usize)> for Edge {
    fn from((source, target): (usize, usize)) -> Self {
        Edge {
            source,
            target,
            weight: 1.0,
        }
    }
}

impl From<(usize, usize, f64)> for Edge {
    fn from((source, target, weight): (usize, usize, f64)) -> Self {
        Edge {
            source,
            target,
            weight,
        }
    }
}

/// A single graph-classification instance.
///
/// Undirected edges are stored once with `source <= target`; self-loops are
/// never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    directed: bool,
    vertex_attributes: Option<Vec<Vec<f64>>>,
    label: usize,
}

impl Graph {
    /// Builds a canonical graph: endpoints are validated, undirected edges are
    /// oriented and deduplicated, self-loops are rejected.
    pub fn from_edge_list<E, I>(n: usize, edges: I, directed: bool) -> Result<Self>
    where
        E: Into<Edge>,
        I: IntoIterator<Item = E>,
    {
        if n == 0 {
            return Err(Error::MalformedGraph("graph needs at least one vertex".into()));
        }
        let mut canonical: Vec<Edge> = Vec::new();
        for edge in edges {
            let mut e: Edge = edge.into();
            if e.source >= n || e.target >= n {
                return Err(Error::MalformedGraph(format!(
                    "edge ({}, {}) has an endpoint outside [0, {n})",
                    e.source, e.target
                )));
            }
            if e.source == e.target {
                return Err(Error::SelfLoop { vertex: e.source });
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::MalformedGraph(format!(
                    "edge ({}, {}) has non-positive or non-finite weight {}",
                    e.source, e.target, e.weight
                )));
            }
            if !directed && e.source > e.target {
                std::mem::swap(&mut e.source, &mut e.target);
            }
            canonical.push(e);
        }
        // Stable sort keeps the first occurrence of a duplicate.
        canonical.sort_by_key(|e| (e.source, e.target));
        canonical.dedup_by_key(|e| (e.source, e.target));
        Ok(Graph {
            n,
            edges: canonical,
            directed,
            vertex_attributes: None,
            label: 0,
        })
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }

    /// Attaches an `n × a` attribute matrix (one row per vertex).
    pub fn with_attributes(mut self, attributes: Vec<Vec<f64>>) -> Result<Self> {
        if attributes.len() != self.n {
            return Err(Error::MalformedGraph(format!(
                "{} attribute rows for {} vertices",
                attributes.len(),
                self.n
            )));
        }
        let width = attributes.first().map_or(0, Vec::len);
        if attributes.iter().any(|row| row.len() != width) {
            return Err(Error::MalformedGraph("ragged vertex attribute rows".into()));
        }
        if attributes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::MalformedGraph("non-finite vertex attribute".into()));
        }
        self.vertex_attributes = Some(attributes);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn vertex_attributes(&self) -> Option<&[Vec<f64>]> {
        self.vertex_attributes.as_deref()
    }

    pub fn attribute_width(&self) -> usize {
        self.vertex_attributes
            .as_ref()
            .and_then(|a| a.first())
            .map_or(0, Vec::len)
    }

    /// Dense row-major adjacency `A`; undirected edges appear in both
    /// triangles.
    pub fn dense_adjacency(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for e in &self.edges {
            a[e.source * n + e.target] = e.weight;
            if !self.directed {
                a[e.target * n + e.source] = e.weight;
            }
        }
        a
    }

    /// Outgoing neighbor lists (both directions for undirected graphs).
    pub fn out_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.source].push(e.target);
            if !self.directed {
                adj[e.target].push(e.source);
            }
        }
        adj
    }

    /// Relabels vertices: old vertex `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::MalformedGraph(format!(
                "permutation of length {} for {} vertices",
                perm.len(),
                self.n
            )));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::MalformedGraph("not a permutation".into()));
            }
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                source: perm[e.source],
                target: perm[e.target],
                weight: e.weight,
            })
            .collect::<Vec<_>>();
        let mut g = Graph::from_edge_list(self.n, edges, self.directed)?.with_label(self.label);
        if let Some(attrs) = &self.vertex_attributes {
            let mut moved = vec![Vec::new(); self.n];
            for (old, row) in attrs.iter().enumerate() {
                moved[perm[old]] = row.clone();
            }
            g = g.with_attributes(moved)?;
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// `D^{-1/2} (A + Aᵀ + I) D^{-1/2}` with `D` the row sums of `A + Aᵀ + I`.
    DegreeNormalized,
    /// `A + Aᵀ + I` unscaled.
    RawSum,
}

impl AdjacencyMode {
    pub const ALL: [AdjacencyMode; 2] = [AdjacencyMode::DegreeNormalized, AdjacencyMode::RawSum];
}

impl fmt::Display for AdjacencyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdjacencyMode::DegreeNormalized => "degree",
            AdjacencyMode::RawSum => "raw",
        })
    }
}

impl FromStr for AdjacencyMode {
    type Err = Error;

    /// Accepts the hyperparameter-table labels too: both `nr` and `nrs` map to
    /// the degree-normalized form.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "degree" | "degree_normalized" | "nr" | "nrs" | "sym" => Ok(AdjacencyMode::DegreeNormalized),
            "raw" | "raw_sum" => Ok(AdjacencyMode::RawSum),
            other => Err(Error::Usage(format!("unknown adjacency mode `{other}`"))),
        }
    }
}

/// Dense `n × n` normalized adjacency, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    mode: AdjacencyMode,
    matrix: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> AdjacencyMode {
        self.mode
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    /// Wraps an arbitrary square matrix, e.g. for hand-built test fixtures.
    pub fn from_dense(n: usize, mode: AdjacencyMode, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::shape("adjacency", &[n, n], &[matrix.len()]));
        }
        Ok(NormalizedAdjacency { n, mode, matrix })
    }
}

pub fn normalize_adjacency(g: &Graph, mode: AdjacencyMode) -> NormalizedAdjacency {
    let n = g.n();
    let a = g.dense_adjacency();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = a[i * n + j] + a[j * n + i];
        }
        m[i * n + i] += 1.0;
    }
    if mode == AdjacencyMode::DegreeNormalized {
        let inv_sqrt: Vec<f64> = m
            .chunks_exact(n)
            .map(|row| 1.0 / row.iter().sum::<f64>().sqrt())
            .collect();
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] *= inv_sqrt[i] * inv_sqrt[j];
            }
        }
    }
    NormalizedAdjacency { n, mode, matrix: m }
}
