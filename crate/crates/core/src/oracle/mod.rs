//! Independent brute-force checks: dense `D − A`, Monte-Carlo random
//! walks, shortest paths, graph families and the 8-node cubic search.

mod figure1;
mod walks;

pub use figure1::{
    automorphism_orbits, figure1_classes, figure1_fixture, find_figure1_graph, isomorphic_graphs, Figure1Graph,
    CLASS_RESISTANCES, FIXTURE_CLASSES,
};
pub use walks::{mc_hitting_time, WalkEstimate};

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AffinityError, Result};
use crate::graph::Graph;

/// `D − A` built from separately materialized degree and adjacency matrices.
pub fn dense_laplacian_oracle(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for u in 0..n {
        for (v, w, _) in g.neighbors(u) {
            a[(u, v)] = w;
        }
    }
    let d = DMatrix::from_diagonal(&a.column_sum());
    d - a
}

/// Unit-weight cycle `0 − 1 − … − (n−1) − 0`.
pub fn build_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(AffinityError::InvalidConfig(format!("cycle needs at least 3 nodes, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    Graph::new(n, &edges)
}

/// Unit-weight path `0 − 1 − … − (n−1)`.
pub fn build_path(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(AffinityError::InvalidConfig("path needs at least 1 node".into()));
    }
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
    Graph::new(n, &edges)
}

/// The cycle `C_{4k+1}` and the path obtained by deleting its edge
/// `(v_{2k}, v_{2k+1})`. Both share the node labels `v_0 … v_{4k}`.
pub fn counterexample_pair(k: usize) -> Result<(Graph, Graph)> {
    if k == 0 {
        return Err(AffinityError::InvalidConfig("counterexample pair needs k ≥ 1".into()));
    }
    let n = 4 * k + 1;
    let cycle = build_cycle(n)?;
    let edges: Vec<_> =
        (0..n).map(|i| (i, (i + 1) % n, 1.0)).filter(|&(a, b, _)| !(a == 2 * k && b == 2 * k + 1)).collect();
    Ok((cycle, Graph::new(n, &edges)?))
}

/// Random spanning tree (each node attaches to a uniformly chosen earlier
/// node) plus distinct random extra edges up to `round(n·avg_degree/2)`
/// edges in total. Weights are uniform in `weight_range`.
pub fn random_connected_graph(n: usize, avg_degree: f64, weight_range: (f64, f64), seed: u64) -> Result<Graph> {
    let target = ((n as f64 * avg_degree / 2.0).round() as usize).max(n.saturating_sub(1));
    random_graph_with_edges(n, target, weight_range, seed)
}

/// Connected random graph with exactly `num_edges` distinct edges
/// (at least a spanning tree, at most the complete graph).
pub fn random_graph_with_edges(n: usize, num_edges: usize, weight_range: (f64, f64), seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(AffinityError::InvalidConfig(format!("random graph needs n ≥ 2, got {n}")));
    }
    let (lo, hi) = weight_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(AffinityError::InvalidConfig(format!("invalid weight range [{lo}, {hi}]")));
    }
    let max_edges = n * (n - 1) / 2;
    let m = num_edges.clamp(n - 1, max_edges);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = |rng: &mut ChaCha8Rng| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    for v in 1..n {
        let u = rng.random_range(0..v);
        seen.insert((u, v));
        let w = weight(&mut rng);
        edges.push((u, v, w));
    }
    while edges.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            let w = weight(&mut rng);
            edges.push((key.0, key.1, w));
        }
    }
    Graph::new(n, &edges)
}

/// `rounds` synchronous Bellman–Ford relaxations from `source`, i.e. the
/// message-passing rule `h_u ← min(h_u, min_v h_v + w_uv)` with
/// `h_source = 0` and `+∞` elsewhere. Here `w` is the edge length.
pub fn bellman_ford_rounds(g: &Graph, source: usize, rounds: usize) -> Result<Vec<f64>> {
    g.check_node(source)?;
    let n = g.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    for _ in 0..rounds {
        let mut next = dist.clone();
        for (u, best) in next.iter_mut().enumerate() {
            for (v, w, _) in g.neighbors(u) {
                *best = best.min(dist[v] + w);
            }
        }
        if next == dist {
            break;
        }
        dist = next;
    }
    Ok(dist)
}

/// Shortest-path distances from `source` with edge weights as lengths;
/// unreachable nodes are `+∞`.
pub fn spd_bellman_ford(g: &Graph, source: usize) -> Result<Vec<f64>> {
    bellman_ford_rounds(g, source, g.num_nodes().saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_oracle_matches_graph_laplacian() {
        let g = random_connected_graph(12, 4.0, (0.1, 10.0), 3).unwrap();
        let a = dense_laplacian_oracle(&g);
        let b = g.dense_laplacian();
        assert!((a - b).abs().max() < 1e-12);
    }

    #[test]
    fn families() {
        let c = build_cycle(5).unwrap();
        assert_eq!((c.num_nodes(), c.num_edges()), (5, 5));
        assert!(build_cycle(2).is_err());
        let p = build_path(4).unwrap();
        assert_eq!(p.num_edges(), 3);

        let (c, p) = counterexample_pair(1).unwrap();
        assert_eq!((c.num_nodes(), p.num_nodes()), (5, 5));
        assert_eq!((c.num_edges(), p.num_edges()), (5, 4));
        assert!(p.is_connected());
        assert_eq!(p.unweighted_degree(2), 1);
        assert_eq!(p.unweighted_degree(3), 1);
        assert!(counterexample_pair(0).is_err());
    }

    #[test]
    fn random_graphs() {
        let g = random_connected_graph(2, 3.0, (1.0, 1.0), 9).unwrap();
        assert_eq!(g.edge_triples(), vec![(0, 1, 1.0)]);
        for seed in 0..10 {
            let g = random_connected_graph(40, 5.0, (0.1, 10.0), seed).unwrap();
            assert!(g.is_connected());
            assert_eq!(g.num_edges(), 100);
            assert!(g.edges().iter().all(|e| e.w >= 0.1 && e.w <= 10.0));
        }
        let a = random_connected_graph(30, 4.0, (0.5, 2.0), 11).unwrap();
        let b = random_connected_graph(30, 4.0, (0.5, 2.0), 11).unwrap();
        assert_eq!(a.edge_triples(), b.edge_triples());
        assert_eq!(random_graph_with_edges(5, 100, (1.0, 1.0), 0).unwrap().num_edges(), 10);
    }

    #[test]
    fn shortest_paths() {
        let c9 = build_cycle(9).unwrap();
        assert_eq!(spd_bellman_ford(&c9, 0).unwrap()[4], 4.0);
        let p = build_path(7).unwrap();
        assert_eq!(spd_bellman_ford(&p, 0).unwrap()[6], 6.0);
        let two = Graph::new(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let d = spd_bellman_ford(&two, 0).unwrap();
        assert_eq!(d[1], 1.0);
        assert!(d[2].is_infinite() && d[3].is_infinite());
        // k rounds reach exactly the k-hop ball
        let d = bellman_ford_rounds(&p, 0, 2).unwrap();
        assert_eq!(&d[..3], &[0.0, 1.0, 2.0]);
        assert!(d[3].is_infinite());
    }
}
