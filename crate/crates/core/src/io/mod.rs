//! Dataset ingestion, on-disk formats, splits and checkpoints.

pub mod canonical;
pub mod checkpoint;
pub mod matrix;
pub mod split;
pub mod tu;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// A labeled collection of graphs with classes `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub n_classes: usize,
    pub has_vertex_attributes: bool,
}

impl Dataset {
    /// Validates that the labels form a contiguous `0..k` range with `k ≥ 2`.
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>) -> Result<Self> {
        let name = name.into();
        let labels: BTreeSet<usize> = graphs.iter().map(Graph::label).collect();
        let n_classes = labels.len();
        if n_classes < 2 {
            return Err(Error::Config(format!(
                "dataset `{name}` needs at least two classes, found {n_classes}"
            )));
        }
        if labels.iter().enumerate().any(|(i, &l)| i != l) {
            return Err(Error::Config(format!(
                "dataset `{name}` labels {labels:?} are not a contiguous 0-based range"
            )));
        }
        let has_vertex_attributes = !graphs.is_empty() && graphs.iter().all(|g| g.vertex_attributes().is_some());
        Ok(Dataset {
            name,
            graphs,
            n_classes,
            has_vertex_attributes,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(Graph::label).collect()
    }

    pub fn average_vertices(&self) -> f64 {
        self.graphs.iter().map(|g| g.n() as f64).sum::<f64>() / self.len().max(1) as f64
    }

    pub fn average_edges(&self) -> f64 {
        self.graphs.iter().map(|g| g.edges().len() as f64).sum::<f64>() / self.len().max(1) as f64
    }
}
