#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgcn::batch::{pad_batch, PaddedBatch};
use qgcn::features::FeatureMatrix;
use qgcn::gradcheck::random_graph;
use qgcn::graph::{normalize_adjacency, AdjacencyMode, Graph, NormalizedAdjacency};
use qgcn::model::{Activation, FMode, ModelConfig, Qgcn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_features(rng: &mut impl Rng, n: usize, d: usize) -> FeatureMatrix {
    let values = (0..n * d).map(|_| rng.random_range(-1.5..1.5)).collect();
    FeatureMatrix::new(n, d, values, None).unwrap()
}

pub fn random_model(rng: &mut impl Rng, input_width: usize, n_classes: usize) -> Qgcn {
    let f_mode = FMode::ALL[rng.random_range(0..3)];
    let activation = Activation::SWEEP[rng.random_range(0..4)];
    let adjacency = AdjacencyMode::ALL[rng.random_range(0..2)];
    let config = ModelConfig {
        input_width,
        layer_widths: vec![rng.random_range(2..7), rng.random_range(2..7)],
        f_mode,
        activation,
        adjacency,
        dropout: 0.0,
        n_classes,
    };
    Qgcn::init(config, rng.random()).unwrap()
}

pub fn single(adj: &NormalizedAdjacency, x: &FeatureMatrix, label: usize) -> PaddedBatch {
    pad_batch([(adj, x, label)]).unwrap()
}

/// A random graph with features and its normalized adjacency.
pub fn random_item(rng: &mut impl Rng, max_n: usize, d: usize, mode: AdjacencyMode) -> (Graph, NormalizedAdjacency, FeatureMatrix) {
    let n = rng.random_range(1..=max_n);
    let p = rng.random_range(0.2..0.8);
    let g = random_graph(rng, n, p);
    let a = normalize_adjacency(&g, mode);
    let x = random_features(rng, n, d);
    (g, a, x)
}

/// All-pairs hop distances by Floyd–Warshall; `None` when unreachable.
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = g.n();
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for e in g.edges() {
        d[e.source][e.target] = Some(1);
        if !g.is_directed() {
            d[e.target][e.source] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Every shortest path from `s` to `t`, by depth-first extension along
/// edges that decrease the remaining distance by one.
pub fn all_shortest_paths(g: &Graph, dist: &[Vec<Option<usize>>], s: usize, t: usize) -> Vec<Vec<usize>> {
    let adj = g.out_neighbors();
    let mut out = Vec::new();
    let Some(total) = dist[s][t] else {
        return out;
    };
    let mut path = vec![s];
    fn extend(
        adj: &[Vec<usize>],
        dist: &[Vec<Option<usize>>],
        t: usize,
        remaining: usize,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let v = *path.last().unwrap();
        if v == t {
            out.push(path.clone());
            return;
        }
        for &w in &adj[v] {
            if dist[w][t] == Some(remaining - 1) {
                path.push(w);
                extend(adj, dist, t, remaining - 1, path, out);
                path.pop();
            }
        }
    }
    extend(&adj, dist, t, total, &mut path, &mut out);
    out
}

/// Normalized betweenness from explicit path enumeration over unordered
/// pairs of an undirected graph.
pub fn brute_force_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let dist = floyd_warshall(g);
    let mut c = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let paths = all_shortest_paths(g, &dist, s, t);
            if paths.is_empty() {
                continue;
            }
            for (v, cv) in c.iter_mut().enumerate() {
                if v == s || v == t {
                    continue;
                }
                let through = paths.iter().filter(|p| p.contains(&v)).count();
                *cv += through as f64 / paths.len() as f64;
            }
        }
    }
    if n > 2 {
        let pairs = ((n - 1) * (n - 2)) as f64 / 2.0;
        c.iter_mut().for_each(|v| *v /= pairs);
    }
    c
}

/// (mean, population std) of distances to reachable vertices from the
/// all-pairs table.
pub fn brute_force_moments(g: &Graph) -> Vec<(f64, f64)> {
    let dist = floyd_warshall(g);
    (0..g.n())
        .map(|s| {
            let ds: Vec<f64> = (0..g.n())
                .filter(|&t| t != s)
                .filter_map(|t| dist[s][t].map(|d| d as f64))
                .collect();
            if ds.is_empty() {
                return (0.0, 0.0);
            }
            let mean = ds.iter().sum::<f64>() / ds.len() as f64;
            let var = ds.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / ds.len() as f64;
            (mean, var.sqrt())
        })
        .collect()
}

/// A random connected undirected graph: a random spanning tree plus extra
/// edges.
pub fn random_connected(rng: &mut impl Rng, n: usize) -> Graph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    let p = rng.random_range(0.0..0.5);
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edge_list(n, edges, false).unwrap()
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
