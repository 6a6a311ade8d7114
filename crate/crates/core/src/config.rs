//! Run configuration and the per-dataset presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, FeatureSpec, Standardization};
use crate::graph::AdjacencyMode;
use crate::io::split::SplitRatios;
use crate::model::{Activation, FMode, ModelConfig};

/// Whether repeats share one split or each draws its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitProtocol {
    #[default]
    Fixed,
    PerRepeat,
}

impl fmt::Display for SplitProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitProtocol::Fixed => "fixed",
            SplitProtocol::PerRepeat => "per_repeat",
        })
    }
}

impl FromStr for SplitProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "fixed" => Ok(SplitProtocol::Fixed),
            "per_repeat" => Ok(SplitProtocol::PerRepeat),
            other => Err(Error::Usage(format!("unknown split protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub epochs: usize,
    pub patience: usize,
    pub repeats: usize,
    pub split: SplitRatios,
    pub split_protocol: SplitProtocol,
    pub seed: u64,
    pub standardization: Standardization,
    pub features: FeatureSpec,
    pub adjacency: AdjacencyMode,
    pub f_mode: FMode,
    pub activation: Activation,
    pub layer_widths: Vec<usize>,
    pub dropout: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            learning_rate: 1e-4,
            batch_size: 128,
            l2: 1e-7,
            epochs: 300,
            patience: 50,
            repeats: 20,
            split: SplitRatios::default(),
            split_protocol: SplitProtocol::Fixed,
            seed: 0,
            standardization: Standardization::ZScore,
            features: FeatureSpec::new(FeatureSet::BCD),
            adjacency: AdjacencyMode::DegreeNormalized,
            f_mode: FMode::X0,
            activation: Activation::Srss,
            layer_widths: vec![250, 250],
            dropout: 0.0,
        }
    }
}

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: [&str; 6] = ["mutagenicity", "nci109", "nci1", "grec", "proteins", "aids"];

impl RunConfig {
    /// Hyperparameters tuned per benchmark. `mutag` is an alias for
    /// `mutagenicity`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = RunConfig::default();
        let (batch_size, l2, standardization, adjacency, set) = match name.to_ascii_lowercase().as_str() {
            "mutagenicity" | "mutag" => (128, 1e-7, Standardization::ZScore, AdjacencyMode::DegreeNormalized, FeatureSet::CD),
            "nci109" => (128, 1e-9, Standardization::ZScore, AdjacencyMode::DegreeNormalized, FeatureSet::BCD),
            "nci1" => (32, 1e-7, Standardization::MinMax, AdjacencyMode::DegreeNormalized, FeatureSet::BCD),
            "grec" => (32, 1e-9, Standardization::MinMax, AdjacencyMode::DegreeNormalized, FeatureSet::BCD),
            "proteins" => (128, 1e-9, Standardization::MinMax, AdjacencyMode::DegreeNormalized, FeatureSet::BCD),
            "aids" => (128, 0.0, Standardization::ZScore, AdjacencyMode::DegreeNormalized, FeatureSet::BCD),
            other => return Err(Error::Usage(format!("no preset named `{other}` (known: {})", PRESETS.join(", ")))),
        };
        Ok(RunConfig {
            batch_size,
            l2,
            standardization,
            adjacency,
            features: FeatureSpec::new(set),
            ..base
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::Config(format!("L2 coefficient {} must be non-negative", self.l2)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("at least one repeat is required".into()));
        }
        if self.features.set.is_empty() {
            return Err(Error::Config("empty feature set".into()));
        }
        if self.layer_widths.is_empty() || self.layer_widths.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {:?}", self.layer_widths)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn model_config(&self, input_width: usize, n_classes: usize) -> ModelConfig {
        ModelConfig {
            input_width,
            layer_widths: self.layer_widths.clone(),
            f_mode: self.f_mode,
            activation: self.activation,
            adjacency: self.adjacency,
            dropout: self.dropout,
            n_classes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.learning_rate, 1e-4);
            assert_eq!(cfg.layer_widths, vec![250, 250]);
        }
        assert_eq!(RunConfig::preset("MUTAG").unwrap(), RunConfig::preset("mutagenicity").unwrap());
        assert!(RunConfig::preset("enzymes").is_err());
    }

    #[test]
    fn preset_rows() {
        let m = RunConfig::preset("mutagenicity").unwrap();
        assert_eq!((m.batch_size, m.l2, m.features.set), (128, 1e-7, FeatureSet::CD));
        let n = RunConfig::preset("nci1").unwrap();
        assert_eq!((n.batch_size, n.standardization), (32, Standardization::MinMax));
        assert_eq!(RunConfig::preset("aids").unwrap().l2, 0.0);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = RunConfig::default();
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.repeats = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.split.test = 0.3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_partial_input() {
        let c = RunConfig::preset("nci109").unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig = serde_json::from_str(r#"{"batch_size": 32}"#).unwrap();
        assert_eq!(partial.batch_size, 32);
        assert_eq!(partial.epochs, 300);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
