use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::sigmoid;

/// Self-regularized symmetric sigmoid with base `G ≡ 1`: `1 − 2/(x²+1)`.
///
/// Even, bounded in `(−1, 1]`, with its minimum −1 at zero, so a zero input
/// is pushed as far as possible from any nonzero one. For `x ≠ 0` it equals
/// `tanh(ln|x|)`.
pub fn srss(x: f64) -> f64 {
    1.0 - 2.0 / (x * x + 1.0)
}

pub fn srss_derivative(x: f64) -> f64 {
    let d = x * x + 1.0;
    4.0 * x / (d * d)
}

/// The general form `G(x) − 2/(x²+1)` over an arbitrary base activation.
pub fn srss_with(x: f64, base: impl Fn(f64) -> f64) -> f64 {
    base(x) - 2.0 / (x * x + 1.0)
}

/// Nonlinearity of the inner GCN layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Srss,
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    /// The activations compared in the ablation sweep.
    pub const SWEEP: [Activation; 4] = [Activation::Srss, Activation::Relu, Activation::Tanh, Activation::Sigmoid];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Srss => srss(x),
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Srss => srss_derivative(x),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Srss => "srss",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srss" => Ok(Activation::Srss),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Usage(format!("unknown activation `{other}`"))),
        }
    }
}
