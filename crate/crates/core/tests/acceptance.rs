//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Benchmark datasets are read from `$QGCN_DATA_DIR/<NAME>` (TU layout),
//! falling back to the workspace `data/` directory.

mod common;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use common::*;
use qgcn::batch::pad_batch;
use qgcn::config::RunConfig;
use qgcn::features::{betweenness, bfs_moments, featurize_all, FeatureSpec, SecondMoment};
use qgcn::gradcheck::{check_all, Tolerances};
use qgcn::graph::normalize_adjacency;
use qgcn::io::tu::load_tu_dataset;
use qgcn::io::Dataset;
use qgcn::model::{srss, Activation, FMode};
use qgcn::train::{repeat_and_select, toy::triangles_vs_stars, Selection};

struct Outcome {
    passed: bool,
    detail: String,
}

fn pass_if(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("QGCN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).unwrap().join("data"))
}

fn load(name: &str) -> Result<Dataset, String> {
    let dir = data_dir().join(name);
    if !dir.is_dir() {
        return Err(format!("dataset {name} not found at {}", dir.display()));
    }
    load_tu_dataset(&dir).map_err(|e| format!("{name}: {e}"))
}

/// Memoized training results keyed by (dataset, activation, f_mode).
struct Runs {
    mutag: Option<(Dataset, Vec<qgcn::features::FeatureMatrix>)>,
    cache: HashMap<(Activation, FMode), Result<Selection, String>>,
}

impl Runs {
    fn new() -> Self {
        let mutag = load("MUTAG").ok().map(|ds| {
            let spec = RunConfig::preset("mutagenicity").unwrap().features;
            let feats = featurize_all(&ds.graphs, &spec).unwrap();
            (ds, feats)
        });
        Runs {
            mutag,
            cache: HashMap::new(),
        }
    }

    fn mutag(&mut self, activation: Activation, f_mode: FMode) -> Result<&Selection, String> {
        let Some((ds, feats)) = &self.mutag else {
            return Err(format!("dataset MUTAG not found at {}", data_dir().join("MUTAG").display()));
        };
        let entry = self.cache.entry((activation, f_mode)).or_insert_with(|| {
            let config = RunConfig {
                activation,
                f_mode,
                ..RunConfig::preset("mutagenicity").unwrap()
            };
            let started = Instant::now();
            let sel = repeat_and_select(&config, ds, feats).map_err(|e| e.to_string());
            eprintln!(
                "  trained MUTAG {activation}/{f_mode}: 20 repeats in {:.1} s",
                started.elapsed().as_secs_f64()
            );
            sel
        });
        entry.as_ref().map_err(Clone::clone)
    }
}

fn srss_identity() -> Outcome {
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let mut x = 0.0;
        while x == 0.0 {
            x = rng.random_range(-1e6..=1e6);
        }
        worst = worst.max((srss(x) - x.abs().ln().tanh()).abs());
    }
    pass_if(
        worst <= 1e-12 && srss(0.0) == -1.0,
        format!("max deviation {worst:.2e} over 10^4 points, srss(0) = {}", srss(0.0)),
    )
}

fn gradient_contract() -> Outcome {
    match check_all(2024, 2, Tolerances::default()) {
        Ok(reports) => {
            let failed: Vec<String> = reports
                .iter()
                .filter(|r| !r.passed())
                .map(|r| format!("{}/{}/{}", r.f_mode, r.activation, r.adjacency))
                .collect();
            let worst = reports.iter().map(|r| r.worst_relative).fold(0.0, f64::max);
            pass_if(
                failed.is_empty() && reports.len() == 24,
                format!("{} combinations, worst relative error {worst:.2e}, failing: {failed:?}", reports.len()),
            )
        }
        Err(e) => pass_if(false, e.to_string()),
    }
}

fn padding_invariance() -> Outcome {
    let mut rng = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let classes = rng.random_range(2..4);
        let model = random_model(&mut rng, 3, classes);
        let items: Vec<_> = (0..rng.random_range(2..7))
            .map(|_| random_item(&mut rng, 10, 3, model.config.adjacency))
            .collect();
        let batch = pad_batch(items.iter().map(|(_, a, x)| (a, x, 0))).unwrap();
        let padded = model.logits(&batch).unwrap();
        let width = padded.cols();
        for (b, (_, a, x)) in items.iter().enumerate() {
            let alone = model.logits(&single(a, x, 0)).unwrap();
            for (p, q) in padded.data()[b * width..(b + 1) * width].iter().zip(alone.data()) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    pass_if(worst <= 1e-10, format!("max |padded − single| {worst:.2e} over 100 batches"))
}

fn permutation_invariance() -> Outcome {
    let mut rng = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let classes = rng.random_range(2..4);
        let model = random_model(&mut rng, 3, classes);
        let (g, a, x) = random_item(&mut rng, 12, 3, model.config.adjacency);
        let perm = random_permutation(&mut rng, g.n());
        let pa = normalize_adjacency(&g.permuted(&perm).unwrap(), model.config.adjacency);
        let px = x.permuted_rows(&perm);
        let l = model.logits(&single(&a, &x, 0)).unwrap();
        let pl = model.logits(&single(&pa, &px, 0)).unwrap();
        worst = worst.max(l.max_abs_diff(&pl));
    }
    pass_if(worst <= 1e-10, format!("max logit change {worst:.2e} over 100 permutations"))
}

fn feature_oracles() -> Outcome {
    let mut rng = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let g = random_connected(&mut rng, n);
        for (f, s) in betweenness(&g, true).iter().zip(brute_force_betweenness(&g)) {
            worst = worst.max((f - s).abs());
        }
        for (f, s) in bfs_moments(&g, SecondMoment::StdDev).iter().zip(brute_force_moments(&g)) {
            worst = worst.max((f.0 - s.0).abs()).max((f.1 - s.1).abs());
        }
    }
    pass_if(worst <= 1e-9, format!("max abs error {worst:.2e} over 200 connected graphs"))
}

fn toy_separability() -> Outcome {
    let started = Instant::now();
    let data = triangles_vs_stars(10, 0).unwrap();
    let config = RunConfig {
        features: FeatureSpec::new("d".parse().unwrap()),
        epochs: 100,
        ..RunConfig::default()
    };
    let feats = featurize_all(&data.graphs, &config.features).unwrap();
    match repeat_and_select(&config, &data, &feats) {
        Ok(sel) => {
            let acc = sel.best_test_accuracy();
            let secs = started.elapsed().as_secs_f64();
            pass_if(
                acc == 1.0 && secs < 60.0,
                format!("best-run test accuracy {acc:.4} in {secs:.1} s"),
            )
        }
        Err(e) => pass_if(false, e.to_string()),
    }
}

fn describe(sel: &Selection) -> String {
    let (mean, se) = sel.test_mean_stderr();
    format!("best-run test {:.4} (mean {mean:.4} ± {se:.4})", sel.best_test_accuracy())
}

fn mutag_reproduction(runs: &mut Runs) -> Outcome {
    match runs.mutag(Activation::Srss, FMode::X0) {
        Ok(sel) => pass_if(sel.best_test_accuracy() >= 0.85, format!("{}; need ≥ 0.85", describe(sel))),
        Err(e) => pass_if(false, e),
    }
}

fn aids_reproduction() -> Outcome {
    let ds = match load("AIDS") {
        Ok(ds) => ds,
        Err(e) => return pass_if(false, e),
    };
    let config = RunConfig::preset("aids").unwrap();
    let feats = match featurize_all(&ds.graphs, &config.features) {
        Ok(f) => f,
        Err(e) => return pass_if(false, e.to_string()),
    };
    match repeat_and_select(&config, &ds, &feats) {
        Ok(sel) => pass_if(sel.best_test_accuracy() >= 0.99, format!("{}; need ≥ 0.99", describe(&sel))),
        Err(e) => pass_if(false, e.to_string()),
    }
}

fn activation_ablation(runs: &mut Runs) -> Outcome {
    let mut accs = Vec::new();
    for act in Activation::SWEEP {
        match runs.mutag(act, FMode::X0) {
            Ok(sel) => accs.push((act, sel.best_test_accuracy())),
            Err(e) => return pass_if(false, format!("{act}: {e}")),
        }
    }
    let srss_acc = accs[0].1;
    let ok = accs[1..].iter().all(|&(_, a)| srss_acc >= a + 0.10 - 1e-12);
    let table: Vec<String> = accs.iter().map(|(a, v)| format!("{a} {v:.4}")).collect();
    pass_if(ok, format!("{}; SRSS must lead each by ≥ 0.10", table.join(", ")))
}

fn f_mode_ablation(runs: &mut Runs) -> Outcome {
    let mut accs = Vec::new();
    for f in FMode::ALL {
        match runs.mutag(Activation::Srss, f) {
            Ok(sel) => accs.push(sel.best_test_accuracy()),
            Err(e) => return pass_if(false, format!("{f}: {e}")),
        }
    }
    let ok = accs[0] >= accs[1] - 0.01 && accs[1] >= accs[2] - 0.01;
    pass_if(
        ok,
        format!("x0 {:.4}, concat {:.4}, last {:.4}; need x0 ≥ concat ≥ last (1-point slack)", accs[0], accs[1], accs[2]),
    )
}

fn ingestion() -> Outcome {
    // (directory, graphs, average vertices, average edges)
    let table = [
        ("MUTAG", 188, 17.93, 19.79),
        ("NCI1", 4110, 29.87, 32.30),
        ("NCI109", 4127, 29.68, 32.13),
        ("PROTEINS", 1113, 39.06, 72.82),
        ("AIDS", 2000, 15.69, 16.20),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, count, vertices, edges) in table {
        match load(name) {
            Ok(ds) => {
                let (v, e) = (ds.average_vertices(), ds.average_edges());
                let good = ds.len() == count && (v - vertices).abs() <= 0.01 * vertices && (e - edges).abs() <= 0.01 * edges;
                ok &= good;
                notes.push(format!("{name} {} graphs {v:.2}/{e:.2}{}", ds.len(), if good { "" } else { " MISMATCH" }));
            }
            Err(e) => {
                ok = false;
                notes.push(e);
            }
        }
    }
    pass_if(ok, notes.join("; "))
}

fn main() -> ExitCode {
    let mut runs = Runs::new();
    type Check<'a> = Box<dyn FnMut(&mut Runs) -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("SRSS identity", Box::new(|_| srss_identity())),
        ("gradient contract", Box::new(|_| gradient_contract())),
        ("padding invariance", Box::new(|_| padding_invariance())),
        ("permutation invariance", Box::new(|_| permutation_invariance())),
        ("feature oracle equivalence", Box::new(|_| feature_oracles())),
        ("toy separability", Box::new(|_| toy_separability())),
        ("MUTAG-188 reproduction", Box::new(mutag_reproduction)),
        ("AIDS-2000 reproduction", Box::new(|_| aids_reproduction())),
        ("activation ablation direction", Box::new(activation_ablation)),
        ("F-mode ablation direction", Box::new(f_mode_ablation)),
        ("dataset ingestion", Box::new(|_| ingestion())),
    ];
    let mut failed = 0;
    for (i, (name, mut check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let outcome = check(&mut runs);
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.passed);
        println!(
            "criterion {:>2} {verdict} {name}: {} [{:.1} s]",
            i + 1,
            outcome.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failed} of 11 criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
