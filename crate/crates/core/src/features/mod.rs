//! Per-vertex input features: degree, centrality, BFS distance moments and
//! external attributes, plus standardization fitted on the training split.

mod cache;
mod centrality;
mod degree;
mod distance;
mod standardize;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cache::{FeatureCache, FEATURE_VERSION};
pub use centrality::{betweenness, closeness};
pub use degree::degree_features;
pub use distance::{bfs_distances, bfs_moments};
pub use standardize::{Standardization, Standardizer};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// `n × d` real matrix of per-vertex inputs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    column_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, column_names: Option<Vec<String>>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape("feature matrix", &[rows, cols], &[values.len()]));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericFault {
                location: format!("feature matrix entry ({}, {})", i / cols.max(1), i % cols.max(1)),
            });
        }
        let column_names = column_names.unwrap_or_else(|| (0..cols).map(|c| format!("f{c}")).collect());
        if column_names.len() != cols {
            return Err(Error::shape("feature names", &[cols], &[column_names.len()]));
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            values,
            column_names,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(col).step_by(self.cols.max(1)).copied()
    }

    /// Rows reordered so that old row `v` lands at `perm[v]`.
    pub fn permuted_rows(&self, perm: &[usize]) -> FeatureMatrix {
        let mut values = vec![0.0; self.values.len()];
        for (old, row) in self.values.chunks_exact(self.cols.max(1)).enumerate().take(self.rows) {
            values[perm[old] * self.cols..(perm[old] + 1) * self.cols].copy_from_slice(row);
        }
        FeatureMatrix {
            values,
            ..self.clone()
        }
    }

    fn from_columns(rows: usize, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let cols = columns.len();
        let mut values = vec![0.0; rows * cols];
        for (c, (_, col)) in columns.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                values[r * cols + c] = *v;
            }
        }
        let names = columns.into_iter().map(|(n, _)| n).collect();
        FeatureMatrix::new(rows, cols, values, Some(names))
    }
}

/// Which feature families feed `X₀`. Columns are always emitted in the order
/// degree, centrality, BFS moments, external attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureSet {
    pub degree: bool,
    pub centrality: bool,
    pub bfs: bool,
    pub external: bool,
}

impl FeatureSet {
    pub const BCD: FeatureSet = FeatureSet {
        degree: true,
        centrality: true,
        bfs: true,
        external: false,
    };
    pub const CD: FeatureSet = FeatureSet {
        degree: true,
        centrality: true,
        bfs: false,
        external: false,
    };

    pub fn is_empty(&self) -> bool {
        !(self.degree || self.centrality || self.bfs || self.external)
    }

    /// Number of columns produced for a graph.
    pub fn width(&self, directed: bool, attribute_width: usize) -> usize {
        let mut w = 0;
        if self.degree {
            w += if directed { 2 } else { 1 };
        }
        if self.centrality {
            w += 1;
        }
        if self.bfs {
            w += 2;
        }
        if self.external {
            w += attribute_width;
        }
        w
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.bfs {
            parts.push("b");
        }
        if self.centrality {
            parts.push("c");
        }
        if self.degree {
            parts.push("d");
        }
        if self.external {
            parts.push("external");
        }
        f.write_str(&parts.join(","))
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    /// Comma-separated list of `b`, `c`, `d`, `external`.
    fn from_str(s: &str) -> Result<Self> {
        let mut set = FeatureSet {
            degree: false,
            centrality: false,
            bfs: false,
            external: false,
        };
        for token in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match token.to_ascii_lowercase().as_str() {
                "b" | "bfs" => set.bfs = true,
                "c" | "centrality" => set.centrality = true,
                "d" | "degree" => set.degree = true,
                "e" | "external" => set.external = true,
                other => return Err(Error::Usage(format!("unknown feature flag `{other}`"))),
            }
        }
        if set.is_empty() {
            return Err(Error::Usage("empty feature set".into()));
        }
        Ok(set)
    }
}

impl TryFrom<String> for FeatureSet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureSet> for String {
    fn from(set: FeatureSet) -> String {
        set.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityKind {
    #[default]
    Betweenness,
    Closeness,
}

/// Definition of the second BFS distance column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondMoment {
    /// Centered: standard deviation of the distances.
    #[default]
    StdDev,
    /// Raw `E[d²]`.
    Raw,
}

/// Everything that determines a featurization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub set: FeatureSet,
    #[serde(default)]
    pub centrality: CentralityKind,
    #[serde(default)]
    pub second_moment: SecondMoment,
}

impl FeatureSpec {
    pub fn new(set: FeatureSet) -> Self {
        FeatureSpec {
            set,
            centrality: CentralityKind::default(),
            second_moment: SecondMoment::default(),
        }
    }

    /// Stable identifier used in cache file names.
    pub fn key(&self) -> String {
        let c = match self.centrality {
            CentralityKind::Betweenness => "btw",
            CentralityKind::Closeness => "clo",
        };
        let m = match self.second_moment {
            SecondMoment::StdDev => "std",
            SecondMoment::Raw => "raw",
        };
        format!("{}-{c}-{m}", self.set.to_string().replace(',', ""))
    }
}

pub fn build_feature_matrix(g: &Graph, spec: &FeatureSpec) -> Result<FeatureMatrix> {
    let set = spec.set;
    if set.is_empty() {
        return Err(Error::Config("no features selected".into()));
    }
    let n = g.n();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    if set.degree {
        let deg = degree_features(g);
        if g.is_directed() {
            columns.push(("in_degree".into(), deg.iter().map(|d| d[0]).collect()));
            columns.push(("out_degree".into(), deg.iter().map(|d| d[1]).collect()));
        } else {
            columns.push(("degree".into(), deg.iter().map(|d| d[0]).collect()));
        }
    }
    if set.centrality {
        let values = match spec.centrality {
            CentralityKind::Betweenness => betweenness(g, true),
            CentralityKind::Closeness => closeness(g),
        };
        columns.push(("centrality".into(), values));
    }
    if set.bfs {
        let moments = bfs_moments(g, spec.second_moment);
        columns.push(("bfs_mean".into(), moments.iter().map(|m| m.0).collect()));
        columns.push(("bfs_second".into(), moments.iter().map(|m| m.1).collect()));
    }
    if set.external {
        let attrs = g
            .vertex_attributes()
            .ok_or_else(|| Error::Config("external features requested but the graph has no vertex attributes".into()))?;
        for c in 0..g.attribute_width() {
            columns.push((format!("attr{c}"), attrs.iter().map(|row| row[c]).collect()));
        }
    }
    FeatureMatrix::from_columns(n, columns)
}

/// Featurizes every graph, in parallel across graphs.
pub fn featurize_all(graphs: &[Graph], spec: &FeatureSpec) -> Result<Vec<FeatureMatrix>> {
    graphs.par_iter().map(|g| build_feature_matrix(g, spec)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edge_list(3, [(0, 1), (1, 2)], false).unwrap()
    }

    #[test]
    fn shapes_follow_the_feature_set() {
        let g = path3();
        let d = build_feature_matrix(&g, &FeatureSpec::new("d".parse().unwrap())).unwrap();
        assert_eq!((d.rows(), d.cols()), (3, 1));
        let all = build_feature_matrix(&g, &FeatureSpec::new(FeatureSet::BCD)).unwrap();
        assert_eq!((all.rows(), all.cols()), (3, 4));
        assert_eq!(all.column_names(), &["degree", "centrality", "bfs_mean", "bfs_second"]);
        assert_eq!(all.get(1, 0), 2.0);
        assert_eq!(all.get(1, 1), 1.0);
        assert_eq!(all.get(0, 2), 1.5);
    }

    #[test]
    fn directed_degree_has_two_columns() {
        let g = Graph::from_edge_list(3, [(0, 1), (1, 2)], true).unwrap();
        let m = build_feature_matrix(&g, &FeatureSpec::new(FeatureSet::CD)).unwrap();
        assert_eq!(m.cols(), 3);
        assert_eq!(FeatureSet::CD.width(true, 0), 3);
    }

    #[test]
    fn external_is_passthrough() {
        let attrs: Vec<Vec<f64>> = (0..3).map(|i| (0..5).map(|j| (i * 5 + j) as f64).collect()).collect();
        let g = path3().with_attributes(attrs.clone()).unwrap();
        let m = build_feature_matrix(&g, &FeatureSpec::new("external".parse().unwrap())).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 5));
        assert_eq!(m.values(), attrs.concat().as_slice());
    }

    #[test]
    fn external_without_attributes_is_a_config_error() {
        let err = build_feature_matrix(&path3(), &FeatureSpec::new("d,external".parse().unwrap()));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn feature_flags_parse() {
        assert_eq!("b,c,d".parse::<FeatureSet>().unwrap(), FeatureSet::BCD);
        assert_eq!("C, D".parse::<FeatureSet>().unwrap(), FeatureSet::CD);
        assert!(matches!("b,x".parse::<FeatureSet>(), Err(Error::Usage(_))));
        assert!("".parse::<FeatureSet>().is_err());
        assert_eq!(FeatureSet::BCD.to_string(), "b,c,d");
    }
}
