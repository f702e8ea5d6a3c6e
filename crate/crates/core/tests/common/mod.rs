#![allow(dead_code)]

use lpform_core::graph::{Features, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi graph with edge probability `p` and Gaussian-ish features.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, feat_dim: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let feats = (0..n * feat_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Graph::from_edges(n, &edges, Some(Features::new(n, feat_dim, feats).unwrap())).unwrap()
}

/// Random graph with a spanning path, so it is connected.
pub fn connected_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, feat_dim: usize) -> Graph {
    let g = random_graph(rng, n, p, feat_dim);
    let mut edges = g.edges();
    edges.extend((1..n).map(|v| (v - 1, v)));
    Graph::from_edges(n, &edges, Some(g.features().clone())).unwrap()
}

pub fn dense_adjacency(g: &Graph) -> Vec<Vec<bool>> {
    let n = g.num_nodes();
    let mut m = vec![vec![false; n]; n];
    for (u, v) in g.edges() {
        m[u][v] = true;
        m[v][u] = true;
    }
    m
}

/// Ten nodes, two loosely joined communities, one-hot features.
pub fn toy_graph() -> Graph {
    let edges = [
        (0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (3, 4),
        (4, 5), (5, 6), (5, 7), (6, 7), (6, 8), (7, 9), (8, 9),
    ];
    let mut feats = vec![0.0; 100];
    for v in 0..10 {
        feats[v * 10 + v] = 1.0;
    }
    Graph::from_edges(10, &edges, Some(Features::new(10, 10, feats).unwrap())).unwrap()
}

pub mod oracle;

/// Seven planted communities, 2708 nodes, 5278 distinct edges (about 80%
/// inside a community), features centred on a per-community mean.
pub fn cora_like(seed: u64) -> Graph {
    const N: usize = 2708;
    const M: usize = 5278;
    const K: usize = 7;
    const DIM: usize = 16;
    let mut rng = rng(seed);
    let community: Vec<usize> = (0..N).map(|v| v % K).collect();
    let members: Vec<Vec<usize>> = (0..K).map(|c| (c..N).step_by(K).collect()).collect();
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(M);
    // spanning tree inside each community, so most of the graph is reachable
    for m in &members {
        for i in 1..m.len() {
            let j = rng.gen_range(0..i);
            let e = (m[j].min(m[i]), m[j].max(m[i]));
            if seen.insert(e) {
                edges.push(e);
            }
        }
    }
    edges.truncate(M / 2);
    seen = edges.iter().copied().collect();
    while edges.len() < M {
        let u = rng.gen_range(0..N);
        let v = if rng.gen::<f64>() < 0.8 {
            let m = &members[community[u]];
            m[rng.gen_range(0..m.len())]
        } else {
            rng.gen_range(0..N)
        };
        let e = (u.min(v), u.max(v));
        if u != v && seen.insert(e) {
            edges.push(e);
        }
    }
    let centres: Vec<f64> = (0..K * DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let feats = (0..N)
        .flat_map(|v| {
            let c = community[v];
            (0..DIM).map(|d| centres[c * DIM + d] + 0.5 * rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()
        })
        .collect();
    Graph::from_edges(N, &edges, Some(Features::new(N, DIM, feats).unwrap())).unwrap()
}
