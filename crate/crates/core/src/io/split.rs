use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.675,
            validation: 0.125,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive: {self:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1: {self:?}")));
        }
        Ok(())
    }
}

/// Disjoint train/validation/test index lists covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl Split {
    /// Short stable fingerprint of the index lists.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (tag, part) in [("train", &self.train), ("validation", &self.validation), ("test", &self.test)] {
            h.update(tag.as_bytes());
            for i in part {
                h.update((*i as u64).to_le_bytes());
            }
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Seeded shuffle of `0..n`, then contiguous slicing at the rounded
/// cumulative ratio boundaries.
pub fn make_split(n: usize, ratios: SplitRatios, seed: u64) -> Result<Split> {
    ratios.validate()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train_end = (ratios.train * n as f64).round() as usize;
    let val_end = (((ratios.train + ratios.validation) * n as f64).round() as usize).clamp(train_end, n);
    if train_end == 0 {
        return Err(Error::Config(format!("a split of {n} items leaves the training set empty")));
    }
    Ok(Split {
        train: order[..train_end].to_vec(),
        validation: order[train_end..val_end].to_vec(),
        test: order[val_end..].to_vec(),
        seed,
    })
}
