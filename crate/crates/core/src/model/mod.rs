//! The QGCN architecture.
//!
//! Inner layers compute `X_k = σ₁(Ã·X_{k−1}·W_k)`; the readout computes the
//! bilinear form `V₁ᵀ·F(X)ᵀ·Ã·X_K·V₂`, a `1 × N_C'` row whatever the vertex
//! count, followed by a sigmoid (binary) or row softmax (multiclass). There
//! are no bias terms.

mod activation;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use activation::{srss, srss_derivative, srss_with, Activation};

use crate::batch::PaddedBatch;
use crate::error::{Error, Result};
use crate::graph::AdjacencyMode;
use crate::tensor::{Tape, Tensor, Var};

/// Choice of the left readout factor `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FMode {
    /// The input features `X₀`.
    X0,
    /// Column concatenation of the input to every layer, readout included:
    /// `[X₀, X₁, …, X_K]`.
    Concat,
    /// The final GCN output `X_K`, making the readout a full quadratic form.
    Last,
}

impl FMode {
    pub const ALL: [FMode; 3] = [FMode::X0, FMode::Concat, FMode::Last];
}

impl fmt::Display for FMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FMode::X0 => "x0",
            FMode::Concat => "concat",
            FMode::Last => "last",
        })
    }
}

impl FromStr for FMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x0" | "input" => Ok(FMode::X0),
            "concat" | "c" => Ok(FMode::Concat),
            "last" => Ok(FMode::Last),
            other => Err(Error::Usage(format!("unknown f-mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_width: usize,
    pub layer_widths: Vec<usize>,
    pub f_mode: FMode,
    pub activation: Activation,
    pub adjacency: AdjacencyMode,
    pub dropout: f64,
    pub n_classes: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 {
            return Err(Error::Config("input feature width is zero".into()));
        }
        if self.layer_widths.is_empty() || self.layer_widths.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be nonempty and positive, got {:?}",
                self.layer_widths
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.n_classes < 2 {
            return Err(Error::Config(format!("{} classes; need at least 2", self.n_classes)));
        }
        Ok(())
    }

    /// One sigmoid output for two classes, one softmax column per class
    /// otherwise.
    pub fn output_width(&self) -> usize {
        if self.n_classes == 2 {
            1
        } else {
            self.n_classes
        }
    }

    pub fn is_binary(&self) -> bool {
        self.n_classes == 2
    }

    /// Column count `d_F` of the selected left readout factor.
    pub fn readout_width(&self) -> usize {
        match self.f_mode {
            FMode::X0 => self.input_width,
            FMode::Concat => self.input_width + self.layer_widths.iter().sum::<usize>(),
            FMode::Last => self.last_width(),
        }
    }

    fn last_width(&self) -> usize {
        *self.layer_widths.last().unwrap_or(&self.input_width)
    }

    /// `(rows, cols)` of every parameter in [`ModelParams::tensors`] order.
    pub fn parameter_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.layer_widths.len() + 2);
        let mut fan_in = self.input_width;
        for &w in &self.layer_widths {
            shapes.push((fan_in, w));
            fan_in = w;
        }
        shapes.push((self.readout_width(), 1));
        shapes.push((self.last_width(), self.output_width()));
        shapes
    }
}

/// GCN weights `W_k` and the readout weights `V₁ (d_F × 1)`, `V₂ (d_K × N_C')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gcn_weights: Vec<Tensor>,
    pub v1: Tensor,
    pub v2: Tensor,
}

impl ModelParams {
    /// `W_1 … W_K, V₁, V₂`.
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.gcn_weights.iter().chain([&self.v1, &self.v2]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.gcn_weights
            .iter_mut()
            .chain([&mut self.v1, &mut self.v2])
            .collect()
    }

    pub fn names(&self) -> Vec<String> {
        (1..=self.gcn_weights.len())
            .map(|k| format!("W{k}"))
            .chain(["V1".to_string(), "V2".to_string()])
            .collect()
    }

    /// Reassembles parameters from the flat [`ModelParams::tensors`] order.
    pub fn from_tensors(mut tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() < 3 {
            return Err(Error::Config(format!("{} parameter tensors; need at least 3", tensors.len())));
        }
        let v2 = tensors.pop().expect("checked length");
        let v1 = tensors.pop().expect("checked length");
        Ok(ModelParams {
            gcn_weights: tensors,
            v1,
            v2,
        })
    }

    pub fn check(&self, config: &ModelConfig) -> Result<()> {
        let expected = config.parameter_shapes();
        let actual: Vec<(usize, usize)> = self
            .tensors()
            .iter()
            .map(|t| if t.rank() == 2 { (t.rows(), t.cols()) } else { (0, 0) })
            .collect();
        if expected != actual {
            return Err(Error::Config(format!(
                "parameter shapes {actual:?} do not match the model configuration {expected:?}"
            )));
        }
        Ok(())
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.sum_squares()).sum()
    }
}

/// Glorot-uniform initialization, deterministic per seed.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = config
        .parameter_shapes()
        .into_iter()
        .map(|(rows, cols)| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Tensor::from_fn([rows, cols], |_| rng.random_range(-bound..=bound))
        })
        .collect();
    ModelParams::from_tensors(tensors)
}

fn ensure_finite(tape: &Tape, v: Var, location: impl FnOnce() -> String) -> Result<()> {
    if tape.value(v).data().iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericFault { location: location() })
    }
}

/// One GCN layer `σ(Ã·X·W)`; works on a single graph (rank 2) or a padded
/// batch (rank 3, `W` shared).
pub fn gcn_layer(tape: &mut Tape, x: Var, adjacency: Var, weight: Var, activation: Activation) -> Result<Var> {
    let propagated = tape.matmul(adjacency, x)?;
    let pre = tape.matmul(propagated, weight)?;
    ensure_finite(tape, pre, || "GCN pre-activation".into())?;
    tape.map(
        pre,
        "GCN activation",
        move |z| activation.apply(z),
        move |z| activation.derivative(z),
    )
}

/// `layer_inputs` holds `[X₀, X₁, …, X_K]`.
pub fn select_f(tape: &mut Tape, mode: FMode, layer_inputs: &[Var]) -> Result<Var> {
    let (first, last) = match layer_inputs {
        [first, .., last] => (*first, *last),
        [only] => (*only, *only),
        [] => return Err(Error::Usage("no layer inputs to select from".into())),
    };
    match mode {
        FMode::X0 => Ok(first),
        FMode::Last => Ok(last),
        FMode::Concat => tape.concat_columns(layer_inputs),
    }
}

/// Logits `V₁ᵀ·Fᵀ·Ã·X_K·V₂` with shape `(B, N_C')` (`B = 1` for rank-2
/// inputs). Evaluated as `(F·V₁)ᵀ·(Ã·(X_K·V₂))`.
pub fn quadratic_readout(tape: &mut Tape, f: Var, adjacency: Var, xk: Var, v1: Var, v2: Var) -> Result<Var> {
    let left = tape.matmul(f, v1)?;
    let right = tape.matmul(xk, v2)?;
    let right = tape.matmul(adjacency, right)?;
    let left_t = tape.transpose(left)?;
    let logits = tape.matmul(left_t, right)?;
    let shape = tape.value(logits).shape().to_vec();
    let batch = if shape.len() == 3 { shape[0] } else { 1 };
    tape.reshape(logits, &[batch, shape[shape.len() - 1]])
}

/// Handles to the values of one forward pass recorded on a tape.
pub struct ForwardPass {
    pub logits: Var,
    pub probabilities: Var,
    /// In [`ModelParams::tensors`] order.
    pub params: Vec<Var>,
}

/// A configured model with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Qgcn {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Qgcn {
    pub fn new(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.check(&config)?;
        Ok(Qgcn { config, params })
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Qgcn::new(config, params)
    }

    /// Records the forward pass on `tape`. Dropout is applied to hidden
    /// layer outputs only when `dropout_rng` is given.
    pub fn forward(&self, tape: &mut Tape, batch: &PaddedBatch, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<ForwardPass> {
        if batch.feature_width() != self.config.input_width {
            return Err(Error::Shape {
                op: "model input",
                lhs: batch.feature_stack.shape().to_vec(),
                rhs: vec![self.config.input_width],
            });
        }
        let adjacency = tape.constant(batch.adjacency_stack.clone());
        let x0 = tape.constant(batch.feature_stack.clone());
        let params: Vec<Var> = self.params.tensors().into_iter().map(|t| tape.parameter(t.clone())).collect();
        let k = self.params.gcn_weights.len();
        let keep = 1.0 - self.config.dropout;
        let mut dropout_rng = dropout_rng.filter(|_| self.config.dropout > 0.0);

        let mut layer_inputs = vec![x0];
        let mut x = x0;
        for (layer, &w) in params[..k].iter().enumerate() {
            x = gcn_layer(tape, x, adjacency, w, self.config.activation).map_err(|e| match e {
                Error::NumericFault { location } => Error::NumericFault {
                    location: format!("GCN layer {}: {location}", layer + 1),
                },
                other => other,
            })?;
            if let Some(rng) = dropout_rng.as_deref_mut() {
                let shape = tape.value(x).shape().to_vec();
                let mask = Tensor::from_fn(shape, |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
                x = tape.mul_const(x, mask)?;
            }
            layer_inputs.push(x);
        }
        let f = select_f(tape, self.config.f_mode, &layer_inputs)?;
        let logits = quadratic_readout(tape, f, adjacency, x, params[k], params[k + 1])?;
        ensure_finite(tape, logits, || "quadratic readout".into())?;
        let probabilities = if self.config.is_binary() {
            tape.sigmoid(logits)?
        } else {
            tape.softmax_rows(logits)?
        };
        Ok(ForwardPass {
            logits,
            probabilities,
            params,
        })
    }

    /// Readout logits `(B, N_C')` without dropout.
    pub fn logits(&self, batch: &PaddedBatch) -> Result<Tensor> {
        let mut tape = Tape::new();
        let pass = self.forward(&mut tape, batch, None)?;
        Ok(tape.value(pass.logits).clone())
    }

    /// Output probabilities `(B, N_C')` without dropout.
    pub fn predict(&self, batch: &PaddedBatch) -> Result<Tensor> {
        let mut tape = Tape::new();
        let pass = self.forward(&mut tape, batch, None)?;
        Ok(tape.value(pass.probabilities).clone())
    }
}

/// Predicted class per row of an output-probability matrix: threshold 0.5
/// for a single sigmoid column, argmax otherwise.
pub fn predicted_classes(probabilities: &Tensor) -> Vec<usize> {
    let cols = probabilities.cols();
    probabilities
        .data()
        .chunks_exact(cols)
        .map(|row| {
            if cols == 1 {
                usize::from(row[0] >= 0.5)
            } else {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
                    .0
            }
        })
        .collect()
}
