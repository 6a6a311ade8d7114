//! Exact betweenness (Brandes) and closeness centrality on unweighted graphs.

use std::collections::VecDeque;

use crate::graph::Graph;

/// Betweenness centrality by Brandes' dependency accumulation.
///
/// Unnormalized values count unordered pairs for undirected graphs and
/// ordered pairs for directed ones. Normalized values divide the ordered-pair
/// sum by `(n-1)(n-2)`, which for undirected graphs is the unordered count
/// over `(n-1)(n-2)/2`. Unreachable pairs contribute nothing.
pub fn betweenness(g: &Graph, normalized: bool) -> Vec<f64> {
    let n = g.n();
    let adj = g.out_neighbors();
    let mut centrality = vec![0.0; n];

    let mut stack = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut queue = VecDeque::with_capacity(n);

    for s in 0..n {
        stack.clear();
        preds.iter_mut().for_each(Vec::clear);
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);

        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }

    // Every undirected pair was counted once from each endpoint.
    let ordered_to_reported = if g.is_directed() { 1.0 } else { 0.5 };
    if normalized {
        if n <= 2 {
            return vec![0.0; n];
        }
        let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
        centrality.iter_mut().for_each(|c| *c *= scale);
    } else {
        centrality.iter_mut().for_each(|c| *c *= ordered_to_reported);
    }
    centrality
}

/// Closeness `(r/(n-1)) · (r / Σ d)` over the `r` vertices reachable from each
/// vertex; zero when nothing is reachable.
pub fn closeness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let adj = g.out_neighbors();
    (0..n)
        .map(|s| {
            let dist = super::distance::bfs_from(&adj, s);
            let (reach, total) = dist
                .iter()
                .enumerate()
                .filter(|&(v, d)| v != s && d.is_some())
                .fold((0usize, 0usize), |(r, t), (_, d)| (r + 1, t + d.unwrap_or(0)));
            if reach == 0 || n < 2 {
                0.0
            } else {
                let r = reach as f64;
                (r / (n - 1) as f64) * (r / total as f64)
            }
        })
        .collect()
}
