//! Loss, optimization and the repeat/select protocol.
//!
//! `train_once` sees only the training and validation samples. The test
//! samples are evaluated once per run by [`repeat_and_select`], after the
//! best-validation parameters have been fixed.

mod adam;
pub mod toy;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::Adam;

use crate::batch::{pad_batch, PaddedBatch};
use crate::config::{RunConfig, SplitProtocol};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};
use crate::graph::{normalize_adjacency, NormalizedAdjacency};
use crate::io::split::{make_split, Split};
use crate::io::Dataset;
use crate::model::{predicted_classes, Activation, FMode, ModelConfig, Qgcn};
use crate::tensor::{Tape, Tensor, Var};

/// One graph ready for the model.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub adjacency: &'a NormalizedAdjacency,
    pub features: &'a FeatureMatrix,
    pub label: usize,
}

pub fn batch_of(samples: &[Sample<'_>]) -> Result<PaddedBatch> {
    pad_batch(samples.iter().map(|s| (s.adjacency, s.features, s.label)))
}

/// Mean BCE (one sigmoid column) or mean cross-entropy, plus
/// `l2 · Σ‖W‖²` over `params`.
pub fn loss(tape: &mut Tape, logits: Var, labels: &[usize], params: &[Var], l2: f64) -> Result<Var> {
    let data = if tape.value(logits).cols() == 1 {
        tape.bce_with_logits(logits, labels)?
    } else {
        tape.softmax_cross_entropy(logits, labels)?
    };
    if l2 == 0.0 {
        return Ok(data);
    }
    let mut total = data;
    for &p in params {
        let sq = tape.sum_squares(p);
        let term = tape.scale(sq, l2);
        total = tape.add(total, term)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Mean data loss (no penalty term).
    pub loss: f64,
    pub accuracy: f64,
}

/// Loss and accuracy over `samples`, evaluated in chunks of `batch_size`.
pub fn evaluate(model: &Qgcn, samples: &[Sample<'_>], batch_size: usize) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Usage("cannot evaluate on an empty split".into()));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in samples.chunks(batch_size.max(1)) {
        let batch = batch_of(chunk)?;
        let (l, c) = evaluate_batch(model, &batch)?;
        loss_sum += l * chunk.len() as f64;
        correct += c;
    }
    Ok(Evaluation {
        loss: loss_sum / samples.len() as f64,
        accuracy: correct as f64 / samples.len() as f64,
    })
}

fn evaluate_batch(model: &Qgcn, batch: &PaddedBatch) -> Result<(f64, usize)> {
    let mut tape = Tape::new();
    let pass = model.forward(&mut tape, batch, None)?;
    let l = loss(&mut tape, pass.logits, &batch.labels, &[], 0.0)?;
    let predicted = predicted_classes(tape.value(pass.probabilities));
    let correct = predicted.iter().zip(&batch.labels).filter(|(p, y)| p == y).count();
    Ok((tape.value(l).item()?, correct))
}

/// Metrics after an epoch. Epoch 0 describes the initial parameters. For
/// later epochs the training figures are averages over the mini-batches as
/// they were visited, before each batch's update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub repeat: usize,
    pub seed: u64,
    pub split_fingerprint: String,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were retained.
    pub selected_epoch: usize,
    pub validation: Evaluation,
    /// Filled in by [`repeat_and_select`].
    pub test: Option<Evaluation>,
    pub wall_clock_secs: f64,
}

/// A finished run together with its retained parameters.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub result: RunResult,
    pub model: Qgcn,
}

/// Trains one model. Parameters from the epoch with the best validation
/// accuracy are retained (ties go to the earliest epoch); training stops
/// after `patience` epochs without improvement or after `epochs`.
pub fn train_once(
    config: &RunConfig,
    model_config: &ModelConfig,
    train: &[Sample<'_>],
    validation: &[Sample<'_>],
    seed: u64,
) -> Result<TrainedRun> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("empty training split".into()));
    }
    let started = Instant::now();
    let mut model = Qgcn::init(model_config.clone(), seed)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed);
    dropout_rng.set_stream(2);
    let mut adam = Adam::new(config.learning_rate);

    let eval_validation = |m: &Qgcn| -> Result<Evaluation> {
        if validation.is_empty() {
            Ok(Evaluation {
                loss: f64::NAN,
                accuracy: 0.0,
            })
        } else {
            evaluate(m, validation, config.batch_size)
        }
    };

    let initial_train = evaluate(&model, train, config.batch_size)?;
    let mut best_validation = eval_validation(&model)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: initial_train.loss,
        train_accuracy: initial_train.accuracy,
        validation_loss: best_validation.loss,
        validation_accuracy: best_validation.accuracy,
    }];
    let mut best_params = model.params.clone();
    let mut best_epoch = 0;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let picked: Vec<Sample<'_>> = chunk.iter().map(|&i| train[i]).collect();
            let batch = batch_of(&picked)?;
            let mut tape = Tape::new();
            let pass = model.forward(&mut tape, &batch, Some(&mut dropout_rng))?;
            let data_loss = loss(&mut tape, pass.logits, &batch.labels, &[], 0.0)?;
            let total = loss(&mut tape, pass.logits, &batch.labels, &pass.params, config.l2)?;
            loss_sum += tape.value(data_loss).item()? * chunk.len() as f64;
            correct += predicted_classes(tape.value(pass.probabilities))
                .iter()
                .zip(&batch.labels)
                .filter(|(p, y)| p == y)
                .count();
            let mut grads = tape.backward(total)?;
            let grads: Vec<Tensor> = pass
                .params
                .iter()
                .map(|&v| grads.take(v).expect("parameters receive gradients"))
                .collect();
            adam.step(&mut model.params.tensors_mut(), &grads)?;
        }
        let val = eval_validation(&model)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            validation_loss: val.loss,
            validation_accuracy: val.accuracy,
        });
        if val.accuracy > best_validation.accuracy {
            best_validation = val;
            best_epoch = epoch;
            best_params = model.params.clone();
        } else if epoch - best_epoch >= config.patience {
            log::debug!("early stop at epoch {epoch}, best epoch {best_epoch}");
            break;
        }
    }
    model.params = best_params;
    Ok(TrainedRun {
        result: RunResult {
            repeat: 0,
            seed,
            split_fingerprint: String::new(),
            history,
            selected_epoch: best_epoch,
            validation: best_validation,
            test: None,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
        model,
    })
}

/// Per-repeat seeds drawn from the master seed.
pub fn repeat_seeds(master: u64, repeats: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..repeats).map(|_| rng.random()).collect()
}

/// Normalized adjacencies and standardized features for one split. The
/// standardizer is fitted on the training part only.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub split: Split,
    pub standardizer: Standardizer,
    pub features: Vec<FeatureMatrix>,
}

impl PreparedSplit {
    pub fn new(split: Split, raw_features: &[FeatureMatrix], config: &RunConfig) -> Result<Self> {
        let fit_on: Vec<&FeatureMatrix> = split.train.iter().map(|&i| &raw_features[i]).collect();
        let standardizer = Standardizer::fit(&fit_on, config.standardization)?;
        let features = raw_features.iter().map(|m| standardizer.apply(m)).collect::<Result<_>>()?;
        Ok(PreparedSplit {
            split,
            standardizer,
            features,
        })
    }

    pub fn samples<'a>(&'a self, adjacencies: &'a [NormalizedAdjacency], labels: &[usize], indices: &[usize]) -> Vec<Sample<'a>> {
        indices
            .iter()
            .map(|&i| Sample {
                adjacency: &adjacencies[i],
                features: &self.features[i],
                label: labels[i],
            })
            .collect()
    }
}

/// A repeat that ended in an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub repeat: usize,
    pub seed: u64,
    pub message: String,
}

/// Outcome of [`repeat_and_select`].
#[derive(Debug, Clone)]
pub struct Selection {
    /// Successful runs in repeat order.
    pub runs: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
    /// Index into `runs` of the run with the highest validation accuracy.
    pub best: usize,
    pub best_model: Qgcn,
    pub best_standardizer: Standardizer,
    pub best_split: Split,
}

impl Selection {
    pub fn best_run(&self) -> &RunResult {
        &self.runs[self.best]
    }

    pub fn best_test_accuracy(&self) -> f64 {
        self.best_run().test.map_or(f64::NAN, |e| e.accuracy)
    }

    pub fn test_accuracies(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.test.map(|e| e.accuracy)).collect()
    }

    /// Mean and standard error of the test accuracy over successful runs.
    pub fn test_mean_stderr(&self) -> (f64, f64) {
        mean_stderr(&self.test_accuracies())
    }
}

/// Sample mean and standard error (`s / √N`, with `N − 1` in `s`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs `config.repeats` independent trainings and picks the one with the
/// highest validation accuracy. Ties go to the lower validation loss, then to
/// the earlier repeat. `features` holds the raw (unstandardized) matrices
/// aligned with `dataset.graphs`.
pub fn repeat_and_select(config: &RunConfig, dataset: &Dataset, features: &[FeatureMatrix]) -> Result<Selection> {
    config.validate()?;
    if features.len() != dataset.len() {
        return Err(Error::Config(format!(
            "{} feature matrices for {} graphs",
            features.len(),
            dataset.len()
        )));
    }
    let input_width = features.first().map_or(0, FeatureMatrix::cols);
    let model_config = config.model_config(input_width, dataset.n_classes);
    model_config.validate()?;
    let adjacencies: Vec<NormalizedAdjacency> = dataset.graphs.par_iter().map(|g| normalize_adjacency(g, config.adjacency)).collect();
    let labels = dataset.labels();
    let seeds = repeat_seeds(config.seed, config.repeats);

    let fixed = match config.split_protocol {
        SplitProtocol::Fixed => Some(PreparedSplit::new(make_split(dataset.len(), config.split, config.seed)?, features, config)?),
        SplitProtocol::PerRepeat => None,
    };

    let outcomes: Vec<Result<(RunResult, Qgcn, PreparedSplit)>> = seeds
        .par_iter()
        .enumerate()
        .map(|(repeat, &seed)| {
            let prepared = match &fixed {
                Some(p) => p.clone(),
                None => PreparedSplit::new(make_split(dataset.len(), config.split, seed)?, features, config)?,
            };
            let train = prepared.samples(&adjacencies, &labels, &prepared.split.train);
            let validation = prepared.samples(&adjacencies, &labels, &prepared.split.validation);
            let test = prepared.samples(&adjacencies, &labels, &prepared.split.test);
            let mut run = train_once(config, &model_config, &train, &validation, seed)?;
            run.result.repeat = repeat;
            run.result.split_fingerprint = prepared.split.fingerprint();
            if !test.is_empty() {
                run.result.test = Some(evaluate(&run.model, &test, config.batch_size)?);
            }
            log::info!(
                "repeat {repeat}: epoch {} selected, validation {:.4}, test {:.4}",
                run.result.selected_epoch,
                run.result.validation.accuracy,
                run.result.test.map_or(f64::NAN, |e| e.accuracy)
            );
            Ok((run.result, run.model, prepared))
        })
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut kept = Vec::new();
    for (repeat, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((result, model, prepared)) => {
                runs.push(result);
                kept.push((model, prepared));
            }
            Err(e) => {
                log::warn!("repeat {repeat} failed: {e}");
                failures.push(RunFailure {
                    repeat,
                    seed: seeds[repeat],
                    message: e.to_string(),
                });
            }
        }
    }
    if runs.is_empty() {
        return Err(Error::AllRepeatsFailed(config.repeats));
    }
    let best = select_best(&runs);
    let (best_model, prepared) = kept.swap_remove(best);
    Ok(Selection {
        runs,
        failures,
        best,
        best_model,
        best_standardizer: prepared.standardizer,
        best_split: prepared.split,
    })
}

fn select_best(runs: &[RunResult]) -> usize {
    let mut best = 0;
    for (i, r) in runs.iter().enumerate().skip(1) {
        let b = &runs[best].validation;
        let better = r.validation.accuracy > b.accuracy || (r.validation.accuracy == b.accuracy && r.validation.loss < b.loss);
        if better {
            best = i;
        }
    }
    best
}

/// Which hyperparameter an ablation sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Activation,
    FMode,
}

impl SweepKind {
    /// Labels and configurations of the sweep cells.
    pub fn cells(self, base: &RunConfig) -> Vec<(String, RunConfig)> {
        match self {
            SweepKind::Activation => Activation::SWEEP
                .iter()
                .map(|&a| (a.to_string(), RunConfig { activation: a, ..base.clone() }))
                .collect(),
            SweepKind::FMode => FMode::ALL
                .iter()
                .map(|&f| (f.to_string(), RunConfig { f_mode: f, ..base.clone() }))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub best_test_accuracy: Option<f64>,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub split_fingerprint: Option<String>,
    pub error: Option<String>,
}

/// One [`repeat_and_select`] per sweep value. A failing cell becomes a row
/// with `error` set; the other cells still run. All cells share the master
/// seed and therefore the split.
pub fn sweep(base: &RunConfig, kind: SweepKind, dataset: &Dataset, features: &[FeatureMatrix]) -> Vec<SweepRow> {
    kind.cells(base)
        .into_iter()
        .map(|(value, cfg)| match repeat_and_select(&cfg, dataset, features) {
            Ok(sel) => {
                let (mean, stderr) = sel.test_mean_stderr();
                SweepRow {
                    value,
                    best_test_accuracy: Some(sel.best_test_accuracy()),
                    mean: Some(mean),
                    stderr: Some(stderr),
                    split_fingerprint: Some(sel.best_split.fingerprint()),
                    error: None,
                }
            }
            Err(e) => SweepRow {
                value,
                best_test_accuracy: None,
                mean: None,
                stderr: None,
                split_fingerprint: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// Gradients of the mean batch loss for the current parameters, in
/// [`ModelParams::tensors`] order.
pub fn batch_gradients(model: &Qgcn, batch: &PaddedBatch, l2: f64) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let pass = model.forward(&mut tape, batch, None)?;
    let total = loss(&mut tape, pass.logits, &batch.labels, &pass.params, l2)?;
    let mut grads = tape.backward(total)?;
    let grads = pass
        .params
        .iter()
        .map(|&v| grads.take(v).expect("parameters receive gradients"))
        .collect();
    Ok((tape.value(total).item()?, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{featurize_all, FeatureSet, FeatureSpec};
    use crate::graph::AdjacencyMode;

    fn toy_config() -> RunConfig {
        RunConfig {
            features: FeatureSpec::new("d".parse().unwrap()),
            layer_widths: vec![8, 8],
            repeats: 2,
            epochs: 5,
            ..RunConfig::default()
        }
    }

    #[test]
    fn ln2_loss_and_penalty() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::zeros([4, 1]));
        let l = loss(&mut tape, p, &[0, 1, 1, 0], &[], 0.0).unwrap();
        assert!((tape.value(l).item().unwrap() - std::f64::consts::LN_2).abs() < 1e-15);

        let w = tape.parameter(Tensor::from_fn([2, 3], |i| i as f64 - 1.0));
        let with = loss(&mut tape, p, &[0, 1, 1, 0], &[w], 0.01).unwrap();
        let penalty: f64 = (0..6).map(|i| (i as f64 - 1.0).powi(2)).sum::<f64>() * 0.01;
        assert!((tape.value(with).item().unwrap() - (std::f64::consts::LN_2 + penalty)).abs() < 1e-14);
    }

    #[test]
    fn confident_correct_predictions_cost_nothing() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::from_rows(&[[40.0], [-40.0]]).unwrap());
        let l = loss(&mut tape, p, &[1, 0], &[], 0.0).unwrap();
        assert!(tape.value(l).item().unwrap() <= 1e-10);
        let q = tape.constant(Tensor::from_rows(&[[0.0, 40.0, 0.0]]).unwrap());
        let l = loss(&mut tape, q, &[1], &[], 0.0).unwrap();
        assert!(tape.value(l).item().unwrap() <= 1e-10);
        assert!(matches!(loss(&mut tape, q, &[3], &[], 0.0), Err(Error::Label { .. })));
    }

    #[test]
    fn standard_error_cases() {
        assert_eq!(mean_stderr(&[0.8; 5]), (0.8, 0.0));
        assert_eq!(mean_stderr(&[0.3]), (0.3, 0.0));
        let (m, s) = mean_stderr(&[0.0, 1.0]);
        assert_eq!(m, 0.5);
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_epochs_returns_initial_evaluation() {
        let data = toy::triangles_vs_stars(4, 0).unwrap();
        let cfg = RunConfig { epochs: 0, ..toy_config() };
        let feats = featurize_all(&data.graphs, &cfg.features).unwrap();
        let prepared = PreparedSplit::new(make_split(data.len(), cfg.split, 0).unwrap(), &feats, &cfg).unwrap();
        let adj: Vec<_> = data.graphs.iter().map(|g| normalize_adjacency(g, AdjacencyMode::DegreeNormalized)).collect();
        let labels = data.labels();
        let train = prepared.samples(&adj, &labels, &prepared.split.train);
        let val = prepared.samples(&adj, &labels, &prepared.split.validation);
        let mc = cfg.model_config(1, 2);
        let run = train_once(&cfg, &mc, &train, &val, 9).unwrap();
        assert_eq!(run.result.history.len(), 1);
        assert_eq!(run.result.selected_epoch, 0);
        assert_eq!(run.model.params, Qgcn::init(mc, 9).unwrap().params);
    }

    #[test]
    fn repeats_are_deterministic_and_selected_by_validation() {
        let data = toy::triangles_vs_stars(6, 3).unwrap();
        let cfg = toy_config();
        let feats = featurize_all(&data.graphs, &cfg.features).unwrap();
        let a = repeat_and_select(&cfg, &data, &feats).unwrap();
        let b = repeat_and_select(&cfg, &data, &feats).unwrap();
        assert_eq!(a.runs.len(), 2);
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.history, y.history);
            assert_eq!(x.test, y.test);
        }
        let max_val = a.runs.iter().map(|r| r.validation.accuracy).fold(0.0, f64::max);
        assert_eq!(a.best_run().validation.accuracy, max_val);
        assert_eq!(a.runs[0].split_fingerprint, a.runs[1].split_fingerprint);
    }

    #[test]
    fn per_repeat_protocol_resplits() {
        let data = toy::triangles_vs_stars(6, 3).unwrap();
        let cfg = RunConfig {
            split_protocol: SplitProtocol::PerRepeat,
            ..toy_config()
        };
        let feats = featurize_all(&data.graphs, &FeatureSpec::new(FeatureSet::CD)).unwrap();
        let sel = repeat_and_select(&RunConfig { features: FeatureSpec::new(FeatureSet::CD), ..cfg }, &data, &feats).unwrap();
        assert_ne!(sel.runs[0].split_fingerprint, sel.runs[1].split_fingerprint);
    }

    #[test]
    fn sweep_cells_enumerate() {
        let base = RunConfig::default();
        let names: Vec<String> = SweepKind::Activation.cells(&base).into_iter().map(|c| c.0).collect();
        assert_eq!(names, ["srss", "relu", "tanh", "sigmoid"]);
        let names: Vec<String> = SweepKind::FMode.cells(&base).into_iter().map(|c| c.0).collect();
        assert_eq!(names, ["x0", "concat", "last"]);
    }
}
