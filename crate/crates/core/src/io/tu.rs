//! Reader for the TU graph-classification text layout.
//!
//! A dataset directory holds `<DS>_A.txt` (comma-separated 1-based edge pairs
//! over the global vertex numbering), `<DS>_graph_indicator.txt` (graph id per
//! vertex), `<DS>_graph_labels.txt`, and optionally `<DS>_node_labels.txt`
//! and `<DS>_node_attributes.txt`. Graphs are read as undirected.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// The `<DS>` prefix: the directory name if `<dir>/<dir>_A.txt` exists,
/// otherwise the unique `*_A.txt` file in the directory.
fn dataset_prefix(dir: &Path) -> Result<String> {
    if let Some(name) = dir.file_name().map(|n| n.to_string_lossy().into_owned()) {
        if dir.join(format!("{name}_A.txt")).is_file() {
            return Ok(name);
        }
    }
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::ingestion(dir, e.to_string()))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(prefix) = name.strip_suffix("_A.txt") {
            found.push(prefix.to_string());
        }
    }
    match found.as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(Error::ingestion(dir, "no <DS>_A.txt file found")),
        _ => Err(Error::ingestion(dir, format!("ambiguous dataset prefixes {found:?}"))),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::ingestion(path, e.to_string()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse `{}`", field.trim())))
}

fn optional(path: PathBuf) -> Option<PathBuf> {
    path.is_file().then_some(path)
}

pub fn load_tu_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let ds = dataset_prefix(dir)?;
    let file = |suffix: &str| dir.join(format!("{ds}_{suffix}.txt"));

    let indicator_path = file("graph_indicator");
    let indicator: Vec<usize> = read_lines(&indicator_path)?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_field(&indicator_path, i + 1, l))
        .collect::<Result<_>>()?;
    let labels_path = file("graph_labels");
    let raw_labels: Vec<i64> = read_lines(&labels_path)?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_field(&labels_path, i + 1, l))
        .collect::<Result<_>>()?;
    let n_graphs = raw_labels.len();
    if let Some((i, &g)) = indicator.iter().enumerate().find(|(_, &g)| g == 0 || g > n_graphs) {
        return Err(Error::parse(
            &indicator_path,
            i + 1,
            format!("graph id {g} outside 1..={n_graphs}"),
        ));
    }

    // Local index of every global vertex within its graph.
    let mut sizes = vec![0usize; n_graphs];
    let local: Vec<usize> = indicator
        .iter()
        .map(|&g| {
            let idx = sizes[g - 1];
            sizes[g - 1] += 1;
            idx
        })
        .collect();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::ingestion(dir, format!("graph {} has no vertices", empty + 1)));
    }

    let a_path = file("A");
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_graphs];
    let mut self_loops = 0usize;
    for (i, line) in read_lines(&a_path)?.iter().enumerate() {
        let mut parts = line.split(',');
        let (Some(u), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(&a_path, i + 1, "expected `u, v`"));
        };
        let u: usize = parse_field(&a_path, i + 1, u)?;
        let v: usize = parse_field(&a_path, i + 1, v)?;
        if u == 0 || v == 0 || u > indicator.len() || v > indicator.len() {
            return Err(Error::parse(&a_path, i + 1, format!("vertex id outside 1..={}", indicator.len())));
        }
        let (gu, gv) = (indicator[u - 1], indicator[v - 1]);
        if gu != gv {
            return Err(Error::ingestion(
                &a_path,
                format!("line {}: edge ({u}, {v}) crosses graphs {gu} and {gv}", i + 1),
            ));
        }
        if u == v {
            self_loops += 1;
            continue;
        }
        edges[gu - 1].push((local[u - 1], local[v - 1]));
    }
    if self_loops > 0 {
        log::warn!("{ds}: dropped {self_loops} self-loop entries");
    }

    let mut attributes: Option<Vec<Vec<f64>>> = None;
    if let Some(path) = optional(file("node_labels")) {
        let node_labels: Vec<i64> = read_lines(&path)?
            .iter()
            .enumerate()
            .map(|(i, l)| parse_field(&path, i + 1, l.split(',').next().unwrap_or(l)))
            .collect::<Result<_>>()?;
        if node_labels.len() != indicator.len() {
            return Err(Error::ingestion(&path, "one node label per vertex expected"));
        }
        let alphabet: BTreeMap<i64, usize> = node_labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        attributes = Some(
            node_labels
                .iter()
                .map(|l| {
                    let mut row = vec![0.0; alphabet.len()];
                    row[alphabet[l]] = 1.0;
                    row
                })
                .collect(),
        );
    }
    if let Some(path) = optional(file("node_attributes")) {
        let rows: Vec<Vec<f64>> = read_lines(&path)?
            .iter()
            .enumerate()
            .map(|(i, l)| l.split(',').map(|f| parse_field(&path, i + 1, f)).collect())
            .collect::<Result<_>>()?;
        if rows.len() != indicator.len() {
            return Err(Error::ingestion(&path, "one attribute row per vertex expected"));
        }
        attributes = Some(match attributes {
            Some(onehot) => onehot.into_iter().zip(rows).map(|(a, b)| [a, b].concat()).collect(),
            None => rows,
        });
    }

    let label_map: BTreeMap<i64, usize> = raw_labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();

    let mut per_graph_attrs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_graphs];
    if let Some(rows) = attributes {
        for (row, &g) in rows.into_iter().zip(&indicator) {
            per_graph_attrs[g - 1].push(row);
        }
    }
    let mut graphs = Vec::with_capacity(n_graphs);
    for (g, graph_edges) in edges.into_iter().enumerate() {
        let mut graph = Graph::from_edge_list(sizes[g], graph_edges, false)
            .map_err(|e| Error::ingestion(dir, format!("graph {}: {e}", g + 1)))?
            .with_label(label_map[&raw_labels[g]]);
        let attrs = std::mem::take(&mut per_graph_attrs[g]);
        if !attrs.is_empty() {
            graph = graph.with_attributes(attrs)?;
        }
        graphs.push(graph);
    }
    Dataset::new(ds, graphs).map_err(|e| Error::ingestion(dir, e.to_string()))
}
