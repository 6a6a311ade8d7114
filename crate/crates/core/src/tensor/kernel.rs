//! GEMM plumbing over `matrixmultiply`, with transposes expressed as strides.

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy)]
struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> MatRef<'a> {
    /// Row-major `rows × cols` block, optionally viewed transposed.
    fn new(data: &'a [f64], rows: usize, cols: usize, transposed: bool) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        if transposed {
            MatRef {
                data,
                rows: cols,
                cols: rows,
                rs: 1,
                cs: cols as isize,
            }
        } else {
            MatRef {
                data,
                rows,
                cols,
                rs: cols as isize,
                cs: 1,
            }
        }
    }
}

/// `c = a·b + beta·c`, `c` row-major and contiguous.
fn gemm(a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut [f64]) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(k, b.rows);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    // SAFETY: the asserts above and `MatRef::new` guarantee every strided
    // access stays inside the borrowed slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn dims(t: &Tensor) -> (usize, usize) {
    let r = t.rank();
    (t.shape[r - 2], t.shape[r - 1])
}

fn logical(t: &Tensor, transposed: bool) -> (usize, usize) {
    let (r, c) = dims(t);
    if transposed {
        (c, r)
    } else {
        (r, c)
    }
}

/// `op(a)·op(b)` where `op` optionally transposes the last two axes.
pub(super) fn matmul(a: &Tensor, ta: bool, b: &Tensor, tb: bool) -> Result<Tensor> {
    let fail = || Error::shape("matmul", &a.shape, &b.shape);
    if !(2..=3).contains(&a.rank()) || !(2..=3).contains(&b.rank()) {
        return Err(fail());
    }
    let (m, k) = logical(a, ta);
    let (k2, n) = logical(b, tb);
    if k != k2 {
        return Err(fail());
    }
    let (ar, ac) = dims(a);
    let (br, bc) = dims(b);
    match (a.rank(), b.rank()) {
        (2, 2) => {
            let mut out = vec![0.0; m * n];
            gemm(
                MatRef::new(&a.data, ar, ac, ta),
                MatRef::new(&b.data, br, bc, tb),
                0.0,
                &mut out,
            );
            Tensor::new([m, n], out)
        }
        (3, 3) => {
            let batch = a.shape[0];
            if b.shape[0] != batch {
                return Err(fail());
            }
            let mut out = vec![0.0; batch * m * n];
            for i in 0..batch {
                gemm(
                    MatRef::new(&a.data[i * ar * ac..(i + 1) * ar * ac], ar, ac, ta),
                    MatRef::new(&b.data[i * br * bc..(i + 1) * br * bc], br, bc, tb),
                    0.0,
                    &mut out[i * m * n..(i + 1) * m * n],
                );
            }
            Tensor::new([batch, m, n], out)
        }
        (3, 2) => {
            let batch = a.shape[0];
            let mut out = vec![0.0; batch * m * n];
            let rhs = MatRef::new(&b.data, br, bc, tb);
            if ta {
                for i in 0..batch {
                    gemm(
                        MatRef::new(&a.data[i * ar * ac..(i + 1) * ar * ac], ar, ac, true),
                        rhs,
                        0.0,
                        &mut out[i * m * n..(i + 1) * m * n],
                    );
                }
            } else {
                // Shared right operand: one large product over stacked rows.
                gemm(MatRef::new(&a.data, batch * ar, ac, false), rhs, 0.0, &mut out);
            }
            Tensor::new([batch, m, n], out)
        }
        _ => Err(fail()),
    }
}

/// `Σ_b a_bᵀ·g_b` for rank-3 `a (B,m,k)` and `g (B,m,n)`: the gradient of a
/// shared right operand.
pub(super) fn batch_reduced_at_b(a: &Tensor, g: &Tensor) -> Tensor {
    let (m, k) = dims(a);
    let (_, n) = dims(g);
    let rows = a.len() / k;
    let mut out = vec![0.0; k * n];
    gemm(
        MatRef::new(&a.data, rows, k, true),
        MatRef::new(&g.data, rows, n, false),
        0.0,
        &mut out,
    );
    debug_assert_eq!(rows % m.max(1), 0);
    Tensor {
        shape: vec![k, n],
        data: out,
    }
}
