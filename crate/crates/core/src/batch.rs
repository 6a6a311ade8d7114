//! Zero padding of variable-size graphs into stacked batch tensors.
//!
//! Padding rows and columns of `Ã` are zero, so every product `Ã·X` ignores
//! the padded rows of `X` and produces zero rows in the padded positions. The
//! quadratic readout contracts through `Ã` as well, which makes the logits of
//! a padded batch identical to per-graph logits.

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::NormalizedAdjacency;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    /// `B × n_max × n_max`
    pub adjacency_stack: Tensor,
    /// `B × n_max × d`
    pub feature_stack: Tensor,
    pub sizes: Vec<usize>,
    pub labels: Vec<usize>,
}

impl PaddedBatch {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn n_max(&self) -> usize {
        self.adjacency_stack.shape()[1]
    }

    pub fn feature_width(&self) -> usize {
        self.feature_stack.shape()[2]
    }
}

pub fn pad_batch<'a, I>(items: I) -> Result<PaddedBatch>
where
    I: IntoIterator<Item = (&'a NormalizedAdjacency, &'a FeatureMatrix, usize)>,
{
    let items: Vec<_> = items.into_iter().collect();
    let Some((_, first, _)) = items.first() else {
        return Err(Error::Batch("empty batch".into()));
    };
    let d = first.cols();
    for (i, (adj, x, _)) in items.iter().enumerate() {
        if x.cols() != d {
            return Err(Error::Batch(format!(
                "graph {i} has feature width {} but the batch uses {d}",
                x.cols()
            )));
        }
        if x.rows() != adj.n() {
            return Err(Error::Batch(format!(
                "graph {i} has {} feature rows for {} vertices",
                x.rows(),
                adj.n()
            )));
        }
    }
    let n_max = items.iter().map(|(a, _, _)| a.n()).max().unwrap_or(0);
    let b = items.len();
    let mut adjacency = vec![0.0; b * n_max * n_max];
    let mut features = vec![0.0; b * n_max * d];
    for (g, (adj, x, _)) in items.iter().enumerate() {
        let n = adj.n();
        let a_block = &mut adjacency[g * n_max * n_max..(g + 1) * n_max * n_max];
        for (i, row) in adj.as_slice().chunks_exact(n).enumerate() {
            a_block[i * n_max..i * n_max + n].copy_from_slice(row);
        }
        let x_block = &mut features[g * n_max * d..(g + 1) * n_max * d];
        x_block[..n * d].copy_from_slice(x.values());
    }
    Ok(PaddedBatch {
        adjacency_stack: Tensor::new([b, n_max, n_max], adjacency)?,
        feature_stack: Tensor::new([b, n_max, d], features)?,
        sizes: items.iter().map(|(a, _, _)| a.n()).collect(),
        labels: items.iter().map(|(_, _, l)| *l).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, AdjacencyMode, Graph};

    fn item(n: usize, edges: &[(usize, usize)], d: usize) -> (NormalizedAdjacency, FeatureMatrix) {
        let g = Graph::from_edge_list(n, edges.iter().copied(), false).unwrap();
        let adj = normalize_adjacency(&g, AdjacencyMode::RawSum);
        let x = FeatureMatrix::new(n, d, (0..n * d).map(|i| i as f64 + 1.0).collect(), None).unwrap();
        (adj, x)
    }

    #[test]
    fn single_graph_is_unpadded() {
        let (a, x) = item(3, &[(0, 1), (1, 2)], 2);
        let batch = pad_batch([(&a, &x, 1)]).unwrap();
        assert_eq!(batch.n_max(), 3);
        assert_eq!(batch.adjacency_stack.data(), a.as_slice());
        assert_eq!(batch.feature_stack.data(), x.values());
        assert_eq!(batch.labels, vec![1]);
    }

    #[test]
    fn smaller_graph_gets_zero_third_row_and_column() {
        let (a2, x2) = item(2, &[(0, 1)], 2);
        let (a3, x3) = item(3, &[(0, 1), (1, 2)], 2);
        let batch = pad_batch([(&a2, &x2, 0), (&a3, &x3, 1)]).unwrap();
        assert_eq!(batch.n_max(), 3);
        assert_eq!(batch.sizes, vec![2, 3]);
        let a = &batch.adjacency_stack.data()[..9];
        for k in 0..3 {
            assert_eq!(a[2 * 3 + k], 0.0);
            assert_eq!(a[k * 3 + 2], 0.0);
        }
        assert_eq!(&batch.feature_stack.data()[4..6], &[0.0, 0.0]);
    }

    #[test]
    fn mismatched_width_is_rejected() {
        let (a2, x2) = item(2, &[(0, 1)], 2);
        let (a3, x3) = item(3, &[(0, 1)], 3);
        assert!(matches!(
            pad_batch([(&a2, &x2, 0), (&a3, &x3, 0)]),
            Err(Error::Batch(_))
        ));
        assert!(pad_batch(std::iter::empty()).is_err());
    }
}
