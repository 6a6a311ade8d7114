//! Line-delimited matrix files, one matrix per line:
//! `{"rows":2,"cols":1,"columns":["degree"],"values":[[1.0],[1.0]]}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRecord {
    rows: usize,
    cols: usize,
    columns: Vec<String>,
    values: Vec<Vec<f64>>,
}

pub fn write_matrices(path: impl AsRef<Path>, matrices: &[FeatureMatrix]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for m in matrices {
        let record = MatrixRecord {
            rows: m.rows(),
            cols: m.cols(),
            columns: m.column_names().to_vec(),
            values: m.values().chunks(m.cols().max(1)).map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrices(path: impl AsRef<Path>) -> Result<Vec<FeatureMatrix>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: MatrixRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if r.values.len() != r.rows || r.values.iter().any(|row| row.len() != r.cols) {
            return Err(Error::parse(path, i + 1, "values do not match rows × cols"));
        }
        let m = FeatureMatrix::new(r.rows, r.cols, r.values.concat(), Some(r.columns))
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = FeatureMatrix::new(2, 2, vec![0.1, -3.0, 1.0 / 7.0, 4.0], None).unwrap();
        let b = FeatureMatrix::new(1, 1, vec![2.0], Some(vec!["degree".into()])).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_matrices(f.path(), &[a.clone(), b.clone()]).unwrap();
        assert_eq!(read_matrices(f.path()).unwrap(), vec![a, b]);
    }

    #[test]
    fn shape_mismatch_is_a_parse_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{{\"rows\":2,\"cols\":1,\"columns\":[\"x\"],\"values\":[[1.0]]}}").unwrap();
        assert!(matches!(read_matrices(f.path()), Err(Error::Parse { line: 1, .. })));
    }
}
