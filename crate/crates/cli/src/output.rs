use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use qgcn::config::RunConfig;
use qgcn::features::FeatureMatrix;
use qgcn::gradcheck::CheckReport;
use qgcn::train::{RunFailure, RunResult, Selection, SweepRow};

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Long format: one line per (repeat, epoch, split).
pub fn write_metrics(path: &Path, runs: &[RunResult]) -> anyhow::Result<()> {
    let mut out = String::from("repeat,seed,epoch,split,loss,accuracy\n");
    for r in runs {
        for e in &r.history {
            writeln!(out, "{},{},{},train,{},{}", r.repeat, r.seed, e.epoch, e.train_loss, e.train_accuracy)?;
            writeln!(
                out,
                "{},{},{},validation,{},{}",
                r.repeat, r.seed, e.epoch, e.validation_loss, e.validation_accuracy
            )?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
pub struct RunLine {
    repeat: usize,
    seed: u64,
    selected_epoch: usize,
    epochs_run: usize,
    validation_accuracy: f64,
    test_accuracy: Option<f64>,
    wall_clock_secs: f64,
}

#[derive(Serialize)]
pub struct Summary {
    dataset: String,
    seed: u64,
    repeats: usize,
    best_test_accuracy: f64,
    test_mean: f64,
    test_stderr: f64,
    selected_repeat: usize,
    selected_seed: u64,
    selected_epoch: usize,
    best_validation_accuracy: f64,
    split_fingerprint: String,
    runs: Vec<RunLine>,
    failures: Vec<RunFailure>,
}

impl Summary {
    pub fn new(dataset: &str, config: &RunConfig, sel: &Selection) -> Self {
        let best = sel.best_run();
        let (mean, stderr) = sel.test_mean_stderr();
        Summary {
            dataset: dataset.to_string(),
            seed: config.seed,
            repeats: config.repeats,
            best_test_accuracy: sel.best_test_accuracy(),
            test_mean: mean,
            test_stderr: stderr,
            selected_repeat: best.repeat,
            selected_seed: best.seed,
            selected_epoch: best.selected_epoch,
            best_validation_accuracy: best.validation.accuracy,
            split_fingerprint: best.split_fingerprint.clone(),
            runs: sel
                .runs
                .iter()
                .map(|r| RunLine {
                    repeat: r.repeat,
                    seed: r.seed,
                    selected_epoch: r.selected_epoch,
                    epochs_run: r.history.len() - 1,
                    validation_accuracy: r.validation.accuracy,
                    test_accuracy: r.test.map(|e| e.accuracy),
                    wall_clock_secs: r.wall_clock_secs,
                })
                .collect(),
            failures: sel.failures.clone(),
        }
    }
}

/// Per-column histogram over all vertices of all graphs, equal-width bins
/// between the column minimum and maximum.
pub fn write_histogram(path: &Path, features: &[FeatureMatrix], bins: usize) -> anyhow::Result<()> {
    let mut out = String::from("column,bin,lower,upper,count\n");
    let Some(first) = features.first() else {
        fs::write(path, out)?;
        return Ok(());
    };
    for (c, name) in first.column_names().iter().enumerate() {
        let values: Vec<f64> = features.iter().flat_map(|m| m.column(c)).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, count) in counts.iter().enumerate() {
            let lower = lo + b as f64 * width;
            writeln!(out, "{name},{b},{lower},{},{count}", lower + width)?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn gradcheck_rows(reports: &[CheckReport]) -> String {
    let mut out = String::from("f_mode,activation,adjacency,checked,worst_relative,worst_absolute,passed,offending\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3e},{:.3e},{},{}",
            r.f_mode,
            r.activation,
            r.adjacency,
            r.checked,
            r.worst_relative,
            r.worst_absolute,
            r.passed(),
            r.offending.join(" ")
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    let mut out = String::from("value,best_test_accuracy,mean,stderr,split_hash,error\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.value,
            opt(r.best_test_accuracy),
            opt(r.mean),
            opt(r.stderr),
            r.split_fingerprint.as_deref().unwrap_or(""),
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out
}
