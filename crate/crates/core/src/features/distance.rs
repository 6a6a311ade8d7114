use std::collections::VecDeque;

use super::SecondMoment;
use crate::graph::Graph;

pub(super) fn bfs_from(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let next = dist[v].map(|d| d + 1);
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = next;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Hop distances from `source` along outgoing edges; `None` if unreachable.
pub fn bfs_distances(g: &Graph, source: usize) -> Vec<Option<usize>> {
    bfs_from(&g.out_neighbors(), source)
}

/// Per-vertex (mean, second moment) of the distances to every other
/// reachable vertex. Vertices that reach nothing get `(0, 0)`.
pub fn bfs_moments(g: &Graph, second: SecondMoment) -> Vec<(f64, f64)> {
    let adj = g.out_neighbors();
    (0..g.n())
        .map(|s| {
            let dist: Vec<f64> = bfs_from(&adj, s)
                .into_iter()
                .enumerate()
                .filter_map(|(v, d)| if v == s { None } else { d.map(|d| d as f64) })
                .collect();
            if dist.is_empty() {
                return (0.0, 0.0);
            }
            let k = dist.len() as f64;
            let mean = dist.iter().sum::<f64>() / k;
            let raw = dist.iter().map(|d| d * d).sum::<f64>() / k;
            match second {
                SecondMoment::Raw => (mean, raw),
                SecondMoment::StdDev => {
                    let var = dist.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / k;
                    (mean, var.sqrt())
                }
            }
        })
        .collect()
}
