//! Dense `f64` tensors and a small reverse-mode tape over them.
//!
//! Only what the QGCN forward/backward pass needs is here: rank ≤ 3 matrix
//! products batched over a leading axis, transposes of the last two axes,
//! elementwise maps with an explicit derivative, column concatenation and the
//! output nonlinearities and losses.

mod kernel;
mod tape;

pub use tape::{sigmoid, Gradients, Tape, Var};

use crate::error::{Error, Result};

/// Row-major dense tensor. A rank-0 tensor holds a single scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape("tensor", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros([n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape("from_rows", &[cols], &[r.len()]));
            }
            data.extend_from_slice(r);
        }
        Tensor::new([rows.len(), cols], data)
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> f64) -> Self {
        let shape = shape.into();
        let len: usize = shape.iter().product();
        Tensor {
            shape,
            data: (0..len).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        match self.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::Usage(format!(
                "item() on tensor of shape {:?}",
                self.shape
            ))),
        }
    }

    /// Entry `(i, j)` of a matrix.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[i * self.shape[1] + j]
    }

    pub fn rows(&self) -> usize {
        self.shape[self.rank() - 2]
    }

    pub fn cols(&self) -> usize {
        self.shape[self.rank() - 1]
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Tensor> {
        Tensor::new(shape, self.data.clone())
    }

    /// Swaps the last two axes.
    pub fn transpose(&self) -> Result<Tensor> {
        let r = self.rank();
        if r < 2 {
            return Err(Error::shape("transpose", &self.shape, &[]));
        }
        let (rows, cols) = (self.shape[r - 2], self.shape[r - 1]);
        let batch = self.len() / (rows * cols).max(1);
        let mut out = vec![0.0; self.len()];
        for b in 0..batch {
            let src = &self.data[b * rows * cols..(b + 1) * rows * cols];
            let dst = &mut out[b * rows * cols..(b + 1) * rows * cols];
            for i in 0..rows {
                for j in 0..cols {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.swap(r - 2, r - 1);
        Tensor::new(shape, out)
    }

    /// Matrix product, batched over a leading axis.
    ///
    /// Accepted ranks: `(m,k)·(k,n)`, `(B,m,k)·(B,k,n)` and `(B,m,k)·(k,n)`
    /// where the right operand is shared by every batch entry.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        kernel::matmul(self, false, other, false)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub(crate) fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_product() {
        let m = Tensor::from_fn([3, 3], |i| i as f64 - 2.5);
        assert_eq!(Tensor::eye(3).matmul(&m).unwrap(), m);
    }

    #[test]
    fn hand_product() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[[1.0], [1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = Tensor::zeros([2, 3]);
        let b = Tensor::zeros([2, 3]);
        match a.matmul(&b) {
            Err(Error::Shape { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn transpose_cases() {
        let m = Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let t = m.transpose().unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(t.transpose().unwrap(), m);
        assert_eq!(Tensor::eye(4).transpose().unwrap(), Tensor::eye(4));
        assert!(Tensor::zeros([3]).transpose().is_err());
    }

    #[test]
    fn batched_shapes() {
        let a = Tensor::from_fn([2, 3, 4], |i| i as f64);
        let w = Tensor::from_fn([4, 5], |i| (i % 3) as f64);
        let shared = a.matmul(&w).unwrap();
        assert_eq!(shared.shape(), &[2, 3, 5]);
        let per_batch = Tensor::new([2, 4, 5], [w.data(), w.data()].concat()).unwrap();
        assert_eq!(a.matmul(&per_batch).unwrap(), shared);
        // Second batch entry computed independently.
        let a1 = Tensor::new([3, 4], a.data()[12..].to_vec()).unwrap();
        assert_eq!(&shared.data()[15..], a1.matmul(&w).unwrap().data());
    }
}
