//! Canonical line-delimited graph format: one JSON object per line,
//!
//! ```text
//! {"n":3,"directed":false,"edges":[[0,1],[1,2]],"attrs":null,"label":1}
//! ```
//!
//! Edges with a weight other than 1 are written as `[u, v, w]`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum EdgeRecord {
    Plain(usize, usize),
    Weighted(usize, usize, f64),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    n: usize,
    directed: bool,
    edges: Vec<EdgeRecord>,
    attrs: Option<Vec<Vec<f64>>>,
    label: usize,
}

impl From<&Graph> for GraphRecord {
    fn from(g: &Graph) -> Self {
        GraphRecord {
            n: g.n(),
            directed: g.is_directed(),
            edges: g
                .edges()
                .iter()
                .map(|e| {
                    if e.weight == 1.0 {
                        EdgeRecord::Plain(e.source, e.target)
                    } else {
                        EdgeRecord::Weighted(e.source, e.target, e.weight)
                    }
                })
                .collect(),
            attrs: g.vertex_attributes().map(<[_]>::to_vec),
            label: g.label(),
        }
    }
}

impl GraphRecord {
    fn into_graph(self) -> Result<Graph> {
        let edges = self.edges.into_iter().map(|e| match e {
            EdgeRecord::Plain(s, t) => Edge::from((s, t)),
            EdgeRecord::Weighted(s, t, w) => Edge::from((s, t, w)),
        });
        let g = Graph::from_edge_list(self.n, edges, self.directed)?.with_label(self.label);
        match self.attrs {
            Some(a) => g.with_attributes(a),
            None => Ok(g),
        }
    }
}

pub fn save_canonical(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for g in &dataset.graphs {
        serde_json::to_writer(&mut out, &GraphRecord::from(g))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a canonical file; the dataset name is the file stem.
pub fn load_canonical(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut graphs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let graph = record
            .into_graph()
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        graphs.push(graph);
    }
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, graphs).map_err(|e| Error::ingestion(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(lines: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        f
    }

    #[test]
    fn round_trip_with_edgeless_and_attributed_graphs() {
        let lonely = Graph::from_edge_list::<(usize, usize), _>(1, [], false).unwrap();
        let attributed = Graph::from_edge_list(3, [(0, 1, 1.0), (2, 1, 0.25)], true)
            .unwrap()
            .with_attributes(vec![vec![0.1, 1e-300], vec![-2.5, 3.0], vec![1.0 / 3.0, 0.0]])
            .unwrap()
            .with_label(1);
        let ds = Dataset::new("rt", vec![lonely, attributed]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.jsonl");
        save_canonical(&ds, &path).unwrap();
        assert_eq!(load_canonical(&path).unwrap(), ds);
    }

    #[test]
    fn schema_violation_reports_line_number() {
        let f = write(
            "{\"n\":2,\"directed\":false,\"edges\":[[0,1]],\"attrs\":null,\"label\":0}\n\
             {\"n\":2,\"directed\":false,\"edges\":[[0,5]],\"attrs\":null,\"label\":1}\n",
        );
        match load_canonical(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = write("{\"n\":2,\"directed\":false}\n");
        assert!(matches!(load_canonical(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn label_gap_fails_validation() {
        let f = write(
            "{\"n\":1,\"directed\":false,\"edges\":[],\"attrs\":null,\"label\":0}\n\
             {\"n\":1,\"directed\":false,\"edges\":[],\"attrs\":null,\"label\":2}\n",
        );
        assert!(matches!(load_canonical(f.path()), Err(Error::Ingestion { .. })));
    }
}
