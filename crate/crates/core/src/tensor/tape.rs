use super::{kernel, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

type Derivative = Box<dyn Fn(f64) -> f64>;

enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Map(Var, Derivative),
    Add(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Tensor),
    Concat(Vec<Var>),
    Sigmoid(Var),
    Softmax(Var),
    Bce(Var, Vec<f64>),
    CrossEntropy(Var, Vec<usize>),
    SumSquares(Var),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation so that [`Tape::backward`] can replay it in
/// reverse. One tape per forward/backward episode.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every value that required them.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn check_finite(t: &Tensor, op: &str) -> Result<()> {
    match t.first_non_finite() {
        None => Ok(()),
        Some(i) => Err(Error::NumericFault {
            location: format!("{op} at flat index {i} of shape {:?}", t.shape()),
        }),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// A value that gradients do not flow into.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A trainable leaf.
    pub fn parameter(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose()?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Transpose(a), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    /// Elementwise `f` with derivative `df`, both evaluated at the input.
    pub fn map(
        &mut self,
        a: Var,
        name: &str,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64 + 'static,
    ) -> Result<Var> {
        let input = self.value(a);
        let value = Tensor::new(input.shape().to_vec(), input.data().iter().map(|&x| f(x)).collect())?;
        check_finite(&value, name)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Map(a, Box::new(df)), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::shape("add", x.shape(), y.shape()));
        }
        let mut value = x.clone();
        value.add_assign(y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let input = self.value(a);
        let value = Tensor {
            shape: input.shape().to_vec(),
            data: input.data().iter().map(|x| x * s).collect(),
        };
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, s), rg)
    }

    /// Elementwise product with a constant tensor (dropout masks).
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        let input = self.value(a);
        if input.shape() != c.shape() {
            return Err(Error::shape("mul_const", input.shape(), c.shape()));
        }
        let value = Tensor {
            shape: input.shape().to_vec(),
            data: input.data().iter().zip(c.data()).map(|(x, m)| x * m).collect(),
        };
        let rg = self.rg(a);
        Ok(self.push(value, Op::MulConst(a, c), rg))
    }

    /// Concatenates along the last axis; leading axes must agree.
    pub fn concat_columns(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Usage("concat of zero tensors".into()))?;
        let lead = {
            let s = self.value(*first).shape();
            if s.is_empty() {
                return Err(Error::shape("concat", s, &[]));
            }
            s[..s.len() - 1].to_vec()
        };
        let rows: usize = lead.iter().product();
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let s = self.value(*p).shape();
            if s.is_empty() || s[..s.len() - 1] != lead[..] {
                return Err(Error::shape("concat", self.value(*first).shape(), s));
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(*p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(Tensor { shape, data }, Op::Concat(parts.to_vec()), rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let input = self.value(a);
        let value = Tensor {
            shape: input.shape().to_vec(),
            data: input.data().iter().map(|&x| sigmoid(x)).collect(),
        };
        check_finite(&value, "sigmoid")?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Sigmoid(a), rg))
    }

    /// Softmax over the last axis.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let input = self.value(a);
        let cols = *input
            .shape()
            .last()
            .ok_or_else(|| Error::shape("softmax_rows", input.shape(), &[]))?;
        let mut data = input.data().to_vec();
        if cols > 0 {
            for row in data.chunks_exact_mut(cols) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for x in row.iter_mut() {
                    *x = (*x - max).exp();
                    total += *x;
                }
                row.iter_mut().for_each(|x| *x /= total);
            }
        }
        let value = Tensor {
            shape: input.shape().to_vec(),
            data,
        };
        check_finite(&value, "softmax_rows")?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Softmax(a), rg))
    }

    /// Mean binary cross-entropy of `sigmoid(z)` (one logit per batch item)
    /// against 0/1 targets, computed from the logits so that saturated
    /// outputs keep full precision.
    pub fn bce_with_logits(&mut self, z: Var, labels: &[usize]) -> Result<Var> {
        let logits = self.value(z);
        if logits.len() != labels.len() || labels.is_empty() {
            return Err(Error::shape("bce", logits.shape(), &[labels.len()]));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Label {
                label: bad,
                classes: 2,
            });
        }
        let targets: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        let total: f64 = logits.data().iter().zip(&targets).map(|(&x, &y)| if y == 1.0 { softplus(-x) } else { softplus(x) }).sum();
        let value = Tensor::scalar(total / labels.len() as f64);
        check_finite(&value, "bce")?;
        let rg = self.rg(z);
        Ok(self.push(value, Op::Bce(z, targets), rg))
    }

    /// Mean categorical cross-entropy of the row softmax of `z (B, C)`,
    /// computed with log-sum-exp.
    pub fn softmax_cross_entropy(&mut self, z: Var, labels: &[usize]) -> Result<Var> {
        let logits = self.value(z);
        if logits.rank() != 2 || logits.rows() != labels.len() || labels.is_empty() {
            return Err(Error::shape("cross_entropy", logits.shape(), &[labels.len()]));
        }
        let classes = logits.cols();
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Label { label: bad, classes });
        }
        let total: f64 = logits
            .data()
            .chunks_exact(classes)
            .zip(labels)
            .map(|(row, &y)| log_sum_exp(row) - row[y])
            .sum();
        let value = Tensor::scalar(total / labels.len() as f64);
        check_finite(&value, "cross_entropy")?;
        let rg = self.rg(z);
        Ok(self.push(value, Op::CrossEntropy(z, labels.to_vec()), rg))
    }

    /// `Σ x²` as a scalar.
    pub fn sum_squares(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum_squares());
        let rg = self.rg(a);
        self.push(value, Op::SumSquares(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self.value(loss);
        if root.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor {
            shape: root.shape().to_vec(),
            data: vec![1.0],
        });
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut send = |v: Var, contribution: Tensor| {
            if !self.rg(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        let elementwise = |input: &Tensor, f: &dyn Fn(f64, f64, f64) -> f64, out: &Tensor| Tensor {
            shape: input.shape().to_vec(),
            data: input
                .data()
                .iter()
                .zip(out.data())
                .zip(g.data())
                .map(|((&x, &y), &gy)| f(x, y, gy))
                .collect(),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, w) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    send(*a, kernel::matmul(g, false, w, true)?);
                }
                if self.rg(*b) {
                    let gw = if x.rank() == 3 && w.rank() == 2 {
                        kernel::batch_reduced_at_b(x, g)
                    } else {
                        kernel::matmul(x, true, g, false)?
                    };
                    send(*b, gw);
                }
            }
            Op::Transpose(a) => send(*a, g.transpose()?),
            Op::Reshape(a) => send(*a, g.reshape(self.value(*a).shape())?),
            Op::Map(a, df) => {
                let x = self.value(*a);
                send(*a, elementwise(x, &|x, _, gy| gy * df(x), &node.value));
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Scale(a, s) => send(
                *a,
                Tensor {
                    shape: g.shape().to_vec(),
                    data: g.data().iter().map(|v| v * s).collect(),
                },
            ),
            Op::MulConst(a, c) => send(
                *a,
                Tensor {
                    shape: g.shape().to_vec(),
                    data: g.data().iter().zip(c.data()).map(|(v, m)| v * m).collect(),
                },
            ),
            Op::Concat(parts) => {
                let total = node.value.cols();
                let rows = node.value.len() / total.max(1);
                let mut offset = 0;
                for p in parts {
                    let part = self.value(*p);
                    let w = part.cols();
                    let mut data = Vec::with_capacity(part.len());
                    for r in 0..rows {
                        data.extend_from_slice(&g.data()[r * total + offset..r * total + offset + w]);
                    }
                    offset += w;
                    send(
                        *p,
                        Tensor {
                            shape: part.shape().to_vec(),
                            data,
                        },
                    );
                }
            }
            Op::Sigmoid(a) => {
                let x = self.value(*a);
                send(*a, elementwise(x, &|_, y, gy| gy * y * (1.0 - y), &node.value));
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let cols = y.cols();
                let mut data = vec![0.0; y.len()];
                for ((out, yr), gr) in data
                    .chunks_exact_mut(cols)
                    .zip(y.data().chunks_exact(cols))
                    .zip(g.data().chunks_exact(cols))
                {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yi), &gi) in out.iter_mut().zip(yr).zip(gr) {
                        *o = yi * (gi - dot);
                    }
                }
                send(
                    *a,
                    Tensor {
                        shape: y.shape().to_vec(),
                        data,
                    },
                );
            }
            Op::Bce(z, targets) => {
                let logits = self.value(*z);
                let scale = g.data()[0] / targets.len() as f64;
                let data = logits
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&x, &y)| scale * (sigmoid(x) - y))
                    .collect();
                send(
                    *z,
                    Tensor {
                        shape: logits.shape().to_vec(),
                        data,
                    },
                );
            }
            Op::CrossEntropy(z, labels) => {
                let logits = self.value(*z);
                let classes = logits.cols();
                let scale = g.data()[0] / labels.len() as f64;
                let mut data = logits.data().to_vec();
                for (row, &y) in data.chunks_exact_mut(classes).zip(labels) {
                    let lse = log_sum_exp(row);
                    row.iter_mut().for_each(|x| *x = scale * (*x - lse).exp());
                    row[y] -= scale;
                }
                send(
                    *z,
                    Tensor {
                        shape: logits.shape().to_vec(),
                        data,
                    },
                );
            }
            Op::SumSquares(a) => {
                let x = self.value(*a);
                let s = 2.0 * g.data()[0];
                send(
                    *a,
                    Tensor {
                        shape: x.shape().to_vec(),
                        data: x.data().iter().map(|v| s * v).collect(),
                    },
                );
            }
            Op::Sum(a) => {
                let x = self.value(*a);
                send(
                    *a,
                    Tensor {
                        shape: x.shape().to_vec(),
                        data: vec![g.data()[0]; x.len()],
                    },
                );
            }
        }
        Ok(())
    }
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow or cancellation.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
