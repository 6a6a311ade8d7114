//! Central-difference verification of the full-model gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{pad_batch, PaddedBatch};
use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::graph::{normalize_adjacency, AdjacencyMode, Graph};
use crate::model::{Activation, FMode, ModelConfig, Qgcn};
use crate::tensor::Tensor;
use crate::train::batch_gradients;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub step: f64,
    pub relative: f64,
    pub absolute: f64,
    /// Below this magnitude a gradient is judged by `absolute` instead.
    pub tiny: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            step: 1e-6,
            relative: 1e-4,
            absolute: 1e-7,
            tiny: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub f_mode: FMode,
    pub activation: Activation,
    pub adjacency: AdjacencyMode,
    pub worst_relative: f64,
    pub worst_absolute: f64,
    pub checked: usize,
    /// `name[index]` of every entry outside tolerance.
    pub offending: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.offending.is_empty()
    }
}

/// Compares analytic gradients of the mean batch loss (plus `l2` penalty)
/// against central differences for every parameter entry. `corrupt` may
/// alter the analytic gradients before comparison.
pub fn check_model(
    model: &Qgcn,
    batch: &PaddedBatch,
    l2: f64,
    tol: Tolerances,
    corrupt: impl Fn(&mut [Tensor]),
) -> Result<CheckReport> {
    let (_, mut analytic) = batch_gradients(model, batch, l2)?;
    corrupt(&mut analytic);
    let names = model.params.names();
    let mut probe = model.clone();
    let mut report = CheckReport {
        f_mode: model.config.f_mode,
        activation: model.config.activation,
        adjacency: model.config.adjacency,
        worst_relative: 0.0,
        worst_absolute: 0.0,
        checked: 0,
        offending: Vec::new(),
    };
    for (p, grad) in analytic.iter().enumerate() {
        for i in 0..grad.len() {
            let original = probe.params.tensors()[p].data()[i];
            probe.params.tensors_mut()[p].data_mut()[i] = original + tol.step;
            let (plus, _) = batch_gradients(&probe, batch, l2)?;
            probe.params.tensors_mut()[p].data_mut()[i] = original - tol.step;
            let (minus, _) = batch_gradients(&probe, batch, l2)?;
            probe.params.tensors_mut()[p].data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * tol.step);
            let a = grad.data()[i];
            let abs = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            report.checked += 1;
            report.worst_absolute = report.worst_absolute.max(abs);
            let ok = if scale < tol.tiny {
                abs <= tol.absolute
            } else {
                let rel = abs / scale;
                report.worst_relative = report.worst_relative.max(rel);
                rel <= tol.relative
            };
            if !ok {
                report.offending.push(format!("{}[{i}]", names[p]));
            }
        }
    }
    Ok(report)
}

/// Random undirected graph on `n` vertices with edge probability `p`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|_| rng.random::<f64>() < p)
        .collect();
    Graph::from_edge_list(n, edges, false).expect("generated edges are valid")
}

/// `count` random graphs with 1 to `max_n` vertices, uniform features in
/// `[−1, 1]` and labels below `n_classes`, padded into one batch.
pub fn random_batch(
    rng: &mut impl Rng,
    count: usize,
    max_n: usize,
    width: usize,
    n_classes: usize,
    mode: AdjacencyMode,
) -> Result<PaddedBatch> {
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let n = rng.random_range(1..=max_n);
        let g = random_graph(rng, n, 0.5);
        let values = (0..n * width).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let x = FeatureMatrix::new(n, width, values, None)?;
        items.push((normalize_adjacency(&g, mode), x, rng.random_range(0..n_classes)));
    }
    pad_batch(items.iter().map(|(a, x, y)| (a, x, *y)))
}

/// Checks every (F-mode, activation, adjacency) combination on a small
/// random model and a batch of 3 graphs with at most 6 vertices.
pub fn check_all(seed: u64, n_classes: usize, tol: Tolerances) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(24);
    for adjacency in AdjacencyMode::ALL {
        for f_mode in FMode::ALL {
            for activation in Activation::SWEEP {
                let config = ModelConfig {
                    input_width: 3,
                    layer_widths: vec![4, 3],
                    f_mode,
                    activation,
                    adjacency,
                    dropout: 0.0,
                    n_classes,
                };
                let model = Qgcn::init(config, rng.random())?;
                let batch = random_batch(&mut rng, 3, 6, 3, n_classes, adjacency)?;
                reports.push(check_model(&model, &batch, 1e-3, tol, |_| {})?);
            }
        }
    }
    Ok(reports)
}
