use std::path::{Path, PathBuf};

use super::{featurize_all, FeatureMatrix, FeatureSpec};
use crate::error::Result;
use crate::graph::Graph;
use crate::io::matrix::{read_matrices, write_matrices};

/// Bumped whenever a feature definition changes, invalidating old caches.
pub const FEATURE_VERSION: u32 = 1;

/// On-disk featurization cache keyed by dataset id, feature spec and
/// [`FEATURE_VERSION`].
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FeatureCache { dir: dir.into() }
    }

    pub fn path(&self, dataset_id: &str, spec: &FeatureSpec) -> PathBuf {
        self.dir.join(format!(
            "{dataset_id}.{}.v{FEATURE_VERSION}.features.jsonl",
            spec.key()
        ))
    }

    /// Cached matrices if present and consistent with `graphs`.
    pub fn load(&self, dataset_id: &str, spec: &FeatureSpec, graphs: &[Graph]) -> Result<Option<Vec<FeatureMatrix>>> {
        let path = self.path(dataset_id, spec);
        if !path.exists() {
            return Ok(None);
        }
        let matrices = read_matrices(&path)?;
        let consistent = matrices.len() == graphs.len()
            && matrices.iter().zip(graphs).all(|(m, g)| m.rows() == g.n());
        if !consistent {
            log::warn!("stale feature cache {}; recomputing", path.display());
            return Ok(None);
        }
        Ok(Some(matrices))
    }

    pub fn store(&self, dataset_id: &str, spec: &FeatureSpec, matrices: &[FeatureMatrix]) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path(dataset_id, spec);
        write_matrices(&path, matrices)?;
        Ok(path)
    }

    /// Returns the features and whether they came from the cache.
    pub fn get_or_compute(
        &self,
        dataset_id: &str,
        spec: &FeatureSpec,
        graphs: &[Graph],
    ) -> Result<(Vec<FeatureMatrix>, bool)> {
        if let Some(hit) = self.load(dataset_id, spec, graphs)? {
            return Ok((hit, true));
        }
        let matrices = featurize_all(graphs, spec)?;
        self.store(dataset_id, spec, &matrices)?;
        Ok((matrices, false))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSet;

    #[test]
    fn second_lookup_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path());
        let graphs = vec![
            Graph::from_edge_list(3, [(0, 1), (1, 2)], false).unwrap(),
            Graph::from_edge_list(2, [(0, 1)], false).unwrap(),
        ];
        let spec = FeatureSpec::new(FeatureSet::BCD);
        let (first, hit) = cache.get_or_compute("toy", &spec, &graphs).unwrap();
        assert!(!hit);
        let (second, hit) = cache.get_or_compute("toy", &spec, &graphs).unwrap();
        assert!(hit);
        assert_eq!(first, second);
        // A different spec is a different key.
        let other = FeatureSpec::new(FeatureSet::CD);
        assert_ne!(cache.path("toy", &spec), cache.path("toy", &other));
    }
}
