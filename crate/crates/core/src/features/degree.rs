use crate::graph::Graph;

/// Per-vertex `[in, out]` degree for directed graphs and `[degree]` otherwise.
pub fn degree_features(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.n();
    let mut indeg = vec![0.0; n];
    let mut outdeg = vec![0.0; n];
    for e in g.edges() {
        outdeg[e.source] += 1.0;
        indeg[e.target] += 1.0;
    }
    if g.is_directed() {
        indeg.into_iter().zip(outdeg).map(|(i, o)| vec![i, o]).collect()
    } else {
        indeg.into_iter().zip(outdeg).map(|(i, o)| vec![i + o]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let g = Graph::from_edge_list(2, [(0, 1)], false).unwrap();
        assert_eq!(degree_features(&g), vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn directed_path() {
        let g = Graph::from_edge_list(3, [(0, 1), (1, 2)], true).unwrap();
        let d = degree_features(&g);
        let indeg: Vec<f64> = d.iter().map(|r| r[0]).collect();
        let outdeg: Vec<f64> = d.iter().map(|r| r[1]).collect();
        assert_eq!(indeg, vec![0.0, 1.0, 1.0]);
        assert_eq!(outdeg, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn star() {
        let g = Graph::from_edge_list(4, [(0, 1), (0, 2), (0, 3)], false).unwrap();
        assert_eq!(
            degree_features(&g),
            vec![vec![3.0], vec![1.0], vec![1.0], vec![1.0]]
        );
    }
}
