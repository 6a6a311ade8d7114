use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Columns whose spread falls below this are treated as constant.
const DEGENERATE_SPREAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Standardization {
    #[serde(rename = "zscore")]
    ZScore,
    #[serde(rename = "minmax")]
    MinMax,
}

impl fmt::Display for Standardization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Standardization::ZScore => "zscore",
            Standardization::MinMax => "minmax",
        })
    }
}

impl FromStr for Standardization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "zscore" => Ok(Standardization::ZScore),
            "minmax" => Ok(Standardization::MinMax),
            other => Err(Error::Usage(format!("unknown standardization `{other}`"))),
        }
    }
}

/// Per-column affine map `x ↦ (x − shift) / scale`, fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mode: Standardization,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Statistics over the concatenation of all rows of the training graphs.
    pub fn fit(train: &[&FeatureMatrix], mode: Standardization) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::Config("cannot fit a standardizer on zero graphs".into()))?;
        let d = first.cols();
        if let Some(bad) = train.iter().find(|m| m.cols() != d) {
            return Err(Error::shape("standardizer fit", &[d], &[bad.cols()]));
        }
        let rows: usize = train.iter().map(|m| m.rows()).sum();
        let mut shift = vec![0.0; d];
        let mut scale = vec![1.0; d];
        if rows == 0 {
            return Ok(Standardizer { mode, shift, scale });
        }
        for c in 0..d {
            let column = || train.iter().flat_map(move |m| m.column(c));
            match mode {
                Standardization::ZScore => {
                    let mean = column().sum::<f64>() / rows as f64;
                    let var = column().map(|x| (x - mean).powi(2)).sum::<f64>() / rows as f64;
                    let std = var.sqrt();
                    shift[c] = mean;
                    scale[c] = if std < DEGENERATE_SPREAD { 1.0 } else { std };
                }
                Standardization::MinMax => {
                    let (lo, hi) = column().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    });
                    shift[c] = lo;
                    scale[c] = if hi - lo < DEGENERATE_SPREAD { 1.0 } else { hi - lo };
                }
            }
        }
        Ok(Standardizer { mode, shift, scale })
    }

    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let d = self.shift.len();
        if m.cols() != d {
            return Err(Error::shape("standardizer apply", &[d], &[m.cols()]));
        }
        let values = m
            .values()
            .chunks_exact(d.max(1))
            .flat_map(|row| {
                row.iter()
                    .zip(&self.shift)
                    .zip(&self.scale)
                    .map(|((x, s), k)| (x - s) / k)
            })
            .collect();
        FeatureMatrix::new(m.rows(), d, values, Some(m.column_names().to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(values.len(), 1, values.to_vec(), None).unwrap()
    }

    #[test]
    fn minmax_maps_to_unit_interval() {
        let m = column(&[0.0, 10.0]);
        let s = Standardizer::fit(&[&m], Standardization::MinMax).unwrap();
        assert_eq!(s.apply(&m).unwrap().values(), &[0.0, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let m = column(&[3.5, 3.5, 3.5]);
        for mode in [Standardization::ZScore, Standardization::MinMax] {
            let s = Standardizer::fit(&[&m], mode).unwrap();
            assert_eq!(s.apply(&m).unwrap().values(), &[0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn zscore_is_centered_and_unit_variance_over_all_training_rows() {
        let a = FeatureMatrix::new(3, 2, vec![1.0, 5.0, 2.0, 7.0, 9.0, -1.0], None).unwrap();
        let b = FeatureMatrix::new(2, 2, vec![4.0, 0.5, -3.0, 2.0], None).unwrap();
        let s = Standardizer::fit(&[&a, &b], Standardization::ZScore).unwrap();
        let (ta, tb) = (s.apply(&a).unwrap(), s.apply(&b).unwrap());
        for c in 0..2 {
            let all: Vec<f64> = ta.column(c).chain(tb.column(c)).collect();
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / all.len() as f64;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let s = Standardizer::fit(&[&column(&[1.0, 2.0])], Standardization::ZScore).unwrap();
        let wide = FeatureMatrix::new(1, 2, vec![1.0, 2.0], None).unwrap();
        assert!(s.apply(&wide).is_err());
        assert!(Standardizer::fit(&[], Standardization::ZScore).is_err());
    }
}
