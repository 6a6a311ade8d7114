use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::Graph;
use crate::io::Dataset;

/// `per_class` triangles (label 0) and `per_class` stars with 3 to 6 leaves
/// (label 1), interleaved. Separable by degree statistics alone.
pub fn triangles_vs_stars(per_class: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        graphs.push(Graph::from_edge_list(3, [(0, 1), (1, 2), (0, 2)], false)?.with_label(0));
        let leaves = rng.random_range(3..=6);
        let star = Graph::from_edge_list(leaves + 1, (1..=leaves).map(|v| (0, v)), false)?;
        graphs.push(star.with_label(1));
    }
    Dataset::new("triangles-vs-stars", graphs)
}
