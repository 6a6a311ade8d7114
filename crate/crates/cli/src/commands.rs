use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qgcn::config::{RunConfig, SplitProtocol};
use qgcn::features::{featurize_all, CentralityKind, FeatureCache, FeatureMatrix, FeatureSet, SecondMoment, Standardization};
use qgcn::gradcheck::{check_all, Tolerances};
use qgcn::graph::{normalize_adjacency, AdjacencyMode};
use qgcn::io::canonical::load_canonical;
use qgcn::io::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use qgcn::io::tu::load_tu_dataset;
use qgcn::io::Dataset;
use qgcn::model::{Activation, FMode};
use qgcn::train::{evaluate, repeat_and_select, sweep, Sample, SweepKind};
use qgcn::Error;

use crate::output;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_AGGREGATE: u8 = 5;

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Usage(_) | Error::Config(_)) => EXIT_USAGE,
        Some(Error::NumericFault { .. }) => EXIT_NUMERIC,
        Some(Error::AllRepeatsFailed(_)) => EXIT_AGGREGATE,
        Some(_) => EXIT_DATA,
        None => 1,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qgcn", version, about = "Quadratic GCN graph classification")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute topological vertex features, cache them and export histograms.
    Featurize(FeaturizeArgs),
    /// Train with repeats and best-validation selection.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Compare activations or F-modes on a shared split.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Tu,
    Canonical,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// TU dataset directory or canonical `.jsonl` file.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Tu)]
    format: Format,
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<Dataset> {
        if !self.dataset.exists() {
            return Err(Error::Usage(format!("dataset path {} does not exist", self.dataset.display())).into());
        }
        let ds = match self.format {
            Format::Tu => load_tu_dataset(&self.dataset)?,
            Format::Canonical => load_canonical(&self.dataset)?,
        };
        log::info!(
            "loaded {}: {} graphs, {} classes, {:.2} vertices and {:.2} edges on average",
            ds.name,
            ds.len(),
            ds.n_classes,
            ds.average_vertices(),
            ds.average_edges()
        );
        Ok(ds)
    }
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML file with run configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named per-dataset preset.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Comma-separated subset of b, c, d, external.
    #[arg(long, value_parser = parse_with::<FeatureSet>)]
    features: Option<FeatureSet>,
    /// Hidden-layer activation: srss, relu, tanh or sigmoid.
    #[arg(long, value_parser = parse_with::<Activation>)]
    activation: Option<Activation>,
    /// Left readout factor: x0, concat or last.
    #[arg(long = "f-mode", value_parser = parse_with::<FMode>)]
    f_mode: Option<FMode>,
    /// Propagation matrix: nr (degree-normalized) or raw.
    #[arg(long, value_parser = parse_with::<AdjacencyMode>)]
    adjacency: Option<AdjacencyMode>,
    /// Mini-batch size.
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// Coefficient of the squared-weight penalty.
    #[arg(long)]
    l2: Option<f64>,
    /// Adam step size.
    #[arg(long = "learning-rate")]
    learning_rate: Option<f64>,
    /// Feature standardization: zscore or minmax.
    #[arg(long, value_parser = parse_with::<Standardization>)]
    standardize: Option<Standardization>,
    /// Maximum training epochs per repeat.
    #[arg(long)]
    epochs: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// Independent training repeats.
    #[arg(long)]
    repeats: Option<usize>,
    /// Master seed for splits, initialization and shuffling.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated hidden layer widths.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    /// Dropout fraction applied during training.
    #[arg(long)]
    dropout: Option<f64>,
    /// fixed (one split for all repeats) or per-repeat.
    #[arg(long = "split-protocol", value_parser = parse_with::<SplitProtocol>)]
    split_protocol: Option<SplitProtocol>,
    /// Use closeness instead of betweenness centrality.
    #[arg(long)]
    closeness: bool,
    /// Use the raw second moment of BFS distances instead of their spread.
    #[arg(long = "raw-second-moment")]
    raw_second_moment: bool,
    /// Reuse featurizations stored in this directory.
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str::<RunConfig>(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?
            }
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => RunConfig::default(),
        };
        if let Some(v) = self.features {
            c.features.set = v;
        }
        if self.closeness {
            c.features.centrality = CentralityKind::Closeness;
        }
        if self.raw_second_moment {
            c.features.second_moment = SecondMoment::Raw;
        }
        if let Some(v) = self.activation {
            c.activation = v;
        }
        if let Some(v) = self.f_mode {
            c.f_mode = v;
        }
        if let Some(v) = self.adjacency {
            c.adjacency = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.l2 {
            c.l2 = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.standardize {
            c.standardization = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.patience {
            c.patience = v;
        }
        if let Some(v) = self.repeats {
            c.repeats = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.layers {
            c.layer_widths = v.clone();
        }
        if let Some(v) = self.dropout {
            c.dropout = v;
        }
        if let Some(v) = self.split_protocol {
            c.split_protocol = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn features_for(ds: &Dataset, config: &RunConfig, cache_dir: Option<&Path>) -> anyhow::Result<(Vec<FeatureMatrix>, bool)> {
    Ok(match cache_dir {
        Some(dir) => FeatureCache::new(dir).get_or_compute(&ds.name, &config.features, &ds.graphs)?,
        None => (featurize_all(&ds.graphs, &config.features)?, false),
    })
}

/// What a run directory was produced from.
#[derive(Serialize)]
struct ExperimentSpec<'a> {
    command: &'a str,
    dataset: &'a Path,
    format: &'a str,
    out: &'a Path,
    sweep: Option<SweepKind>,
    config: &'a RunConfig,
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Tu => "tu",
        Format::Canonical => "canonical",
    }
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_with::<FeatureSet>, default_value = "b,c,d")]
    features: FeatureSet,
    #[arg(long)]
    closeness: bool,
    #[arg(long = "raw-second-moment")]
    raw_second_moment: bool,
    /// Number of histogram bins per feature column.
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Directory for the cache and `histogram.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitPart {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = SplitPart::Test)]
    split: SplitPart,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// Also write the accuracy record to this JSON file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of classes of the checked model (2 uses the sigmoid output).
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Write the report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepArg {
    Activation,
    FMode,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    kind: SweepArg,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Sweep(a) => run_sweep(a),
    }
}

fn featurize(a: FeaturizeArgs) -> anyhow::Result<ExitCode> {
    let ds = a.data.load()?;
    let mut config = RunConfig::default();
    config.features.set = a.features;
    if a.closeness {
        config.features.centrality = CentralityKind::Closeness;
    }
    if a.raw_second_moment {
        config.features.second_moment = SecondMoment::Raw;
    }
    fs::create_dir_all(&a.out)?;
    let (features, hit) = features_for(&ds, &config, Some(&a.out))?;
    let width = features.first().map_or(0, FeatureMatrix::cols);
    output::write_histogram(&a.out.join("histogram.csv"), &features, a.bins.max(1))?;
    let cache_file = FeatureCache::new(&a.out).path(&ds.name, &config.features);
    println!(
        "{}",
        serde_json::json!({
            "dataset": ds.name,
            "graphs": features.len(),
            "width": width,
            "cache_hit": hit,
            "cache": cache_file,
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn train(a: TrainArgs) -> anyhow::Result<ExitCode> {
    let config = a.run.resolve()?;
    let ds = a.data.load()?;
    let (features, _) = features_for(&ds, &config, a.run.cache_dir.as_deref())?;
    fs::create_dir_all(&a.out)?;
    let spec = ExperimentSpec {
        command: "train",
        dataset: &a.data.dataset,
        format: format_name(a.data.format),
        out: &a.out,
        sweep: None,
        config: &config,
    };
    output::write_json(&a.out.join("spec.json"), &spec)?;

    let selection = repeat_and_select(&config, &ds, &features)?;
    output::write_metrics(&a.out.join("metrics.csv"), &selection.runs)?;
    let checkpoint = Checkpoint {
        model: selection.best_model.clone(),
        run: Some(config.clone()),
        standardizer: Some(selection.best_standardizer.clone()),
        split: Some(selection.best_split.clone()),
    };
    save_checkpoint(&checkpoint, a.out.join("model.ckpt"))?;
    let summary = output::Summary::new(&ds.name, &config, &selection);
    output::write_json(&a.out.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EvalRecord {
    checkpoint: PathBuf,
    dataset: String,
    split: String,
    graphs: usize,
    loss: f64,
    accuracy: f64,
}

fn eval(a: EvalArgs) -> anyhow::Result<ExitCode> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let run = ckpt
        .run
        .clone()
        .ok_or_else(|| Error::Incompatible("checkpoint lacks its run configuration".into()))?;
    let ds = a.data.load()?;
    let raw = featurize_all(&ds.graphs, &run.features)?;
    let features: Vec<FeatureMatrix> = match &ckpt.standardizer {
        Some(s) => raw.iter().map(|m| s.apply(m)).collect::<qgcn::Result<_>>()?,
        None => raw,
    };
    let indices: Vec<usize> = match (a.split, &ckpt.split) {
        (SplitPart::All, _) => (0..ds.len()).collect(),
        (part, Some(split)) => {
            let covered = split.train.len() + split.validation.len() + split.test.len();
            if covered != ds.len() {
                return Err(Error::Incompatible(format!(
                    "checkpoint split covers {covered} graphs, dataset has {}",
                    ds.len()
                ))
                .into());
            }
            match part {
                SplitPart::Train => split.train.clone(),
                SplitPart::Validation => split.validation.clone(),
                _ => split.test.clone(),
            }
        }
        (_, None) => bail!(Error::Usage("checkpoint has no stored split; use --split all".into())),
    };
    let adjacencies: Vec<_> = ds.graphs.iter().map(|g| normalize_adjacency(g, ckpt.model.config.adjacency)).collect();
    let samples: Vec<Sample<'_>> = indices
        .iter()
        .map(|&i| Sample {
            adjacency: &adjacencies[i],
            features: &features[i],
            label: ds.graphs[i].label(),
        })
        .collect();
    let result = evaluate(&ckpt.model, &samples, a.batch_size.unwrap_or(run.batch_size))?;
    let record = EvalRecord {
        checkpoint: a.checkpoint.clone(),
        dataset: ds.name.clone(),
        split: format!("{:?}", a.split).to_lowercase(),
        graphs: samples.len(),
        loss: result.loss,
        accuracy: result.accuracy,
    };
    if let Some(out) = &a.out {
        output::write_json(out, &record)?;
    }
    println!("{}", serde_json::to_string(&record)?);
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(a: GradcheckArgs) -> anyhow::Result<ExitCode> {
    if a.classes < 2 {
        return Err(Error::Usage("--classes must be at least 2".into()).into());
    }
    let reports = check_all(a.seed, a.classes, Tolerances::default())?;
    let rows = output::gradcheck_rows(&reports);
    print!("{rows}");
    if let Some(out) = &a.out {
        fs::write(out, &rows)?;
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).collect();
    let worst = reports.iter().map(|r| r.worst_relative).fold(0.0, f64::max);
    if failed.is_empty() {
        println!("all {} combinations passed; worst relative error {worst:.3e}", reports.len());
        Ok(ExitCode::SUCCESS)
    } else {
        for r in &failed {
            eprintln!(
                "FAILED {}/{}/{}: {}",
                r.f_mode,
                r.activation,
                r.adjacency,
                r.offending.join(", ")
            );
        }
        Ok(ExitCode::from(EXIT_NUMERIC))
    }
}

fn run_sweep(a: SweepArgs) -> anyhow::Result<ExitCode> {
    let config = a.run.resolve()?;
    let kind = match a.kind {
        SweepArg::Activation => SweepKind::Activation,
        SweepArg::FMode => SweepKind::FMode,
    };
    let ds = a.data.load()?;
    let (features, _) = features_for(&ds, &config, a.run.cache_dir.as_deref())?;
    fs::create_dir_all(&a.out)?;
    let spec = ExperimentSpec {
        command: "sweep",
        dataset: &a.data.dataset,
        format: format_name(a.data.format),
        out: &a.out,
        sweep: Some(kind),
        config: &config,
    };
    output::write_json(&a.out.join("spec.json"), &spec)?;
    let rows = sweep(&config, kind, &ds, &features);
    let csv = output::sweep_csv(&rows);
    fs::write(a.out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    if rows.iter().all(|r| r.error.is_some()) {
        return Err(Error::AllRepeatsFailed(config.repeats).into());
    }
    Ok(ExitCode::SUCCESS)
}
