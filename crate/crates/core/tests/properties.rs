use proptest::prelude::*;

use affinity_core::affinity::AffinityTable;
use affinity_core::affinity::{effective_resistance, ResistanceTable};
use affinity_core::embedding::{exact_embedding, random_rotation};
use affinity_core::expressivity::{affinity_edge_colors, wl_refine};
use affinity_core::lapsolve::{project_out_nullspace, solve_laplacian, SolverConfig};
use affinity_core::oracle::{
    dense_laplacian_oracle, random_connected_graph, random_graph_with_edges, spd_bellman_ford,
};
use affinity_core::Graph;

fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n, 1.0f64..5.0, any::<u64>())
        .prop_map(|(n, deg, seed)| random_connected_graph(n, deg, (0.1, 10.0), seed).unwrap())
}

/// Possibly disconnected: a few random edges, duplicates allowed.
fn arb_multigraph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (2usize..12).prop_flat_map(|n| {
        let edge = (0..n, 0..n, 0.1f64..10.0).prop_filter("no loops", |(u, v, _)| u != v);
        (Just(n), prop::collection::vec(edge, 0..30))
    })
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_matches_dense_oracle((n, edges) in arb_multigraph()) {
        let g = Graph::new(n, &edges).unwrap();
        let l = g.dense_laplacian();
        let oracle = dense_laplacian_oracle(&g);
        prop_assert!((&l - &oracle).abs().max() < 1e-12);
        // merged weights: total weight is the sum of all inputs
        let total: f64 = edges.iter().map(|e| e.2).sum();
        prop_assert!((g.total_weight() - total).abs() < 1e-9 * total.max(1.0));
        let eig = l.symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&x| x > -1e-9));
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let lx = g.apply_laplacian(&x).unwrap();
        let quad: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
        prop_assert!(quad >= -1e-12);
    }

    #[test]
    fn iterative_matches_dense(g in arb_graph(60), phase in 0.0f64..6.0) {
        let n = g.num_nodes();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 + phase).cos()).collect();
        let cfg = SolverConfig::default();
        let dense = solve_laplacian(&g, &b, &cfg.dense_only()).unwrap();
        let iter = solve_laplacian(&g, &b, &cfg.iterative_only()).unwrap();
        let scale = dense.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        prop_assert!(max_abs(&dense, &iter) <= 1e-7 * scale);
        // solution lies in the range of L
        let s: f64 = iter.iter().sum();
        prop_assert!(s.abs() < 1e-8 * scale * n as f64);
        // and solves the projected system
        let lx = g.apply_laplacian(&iter).unwrap();
        let pb = project_out_nullspace(&g, &b).unwrap();
        let bnorm = pb.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rnorm = lx.iter().zip(&pb).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        prop_assert!(rnorm <= 1e-7 * bnorm.max(1e-300));
    }

    #[test]
    fn solver_is_linear(g in arb_graph(40), a in -3.0f64..3.0) {
        let n = g.num_nodes();
        let cfg = SolverConfig::default().iterative_only();
        let b1: Vec<f64> = (0..n).map(|i| (i % 3) as f64 - 1.0).collect();
        let b2: Vec<f64> = (0..n).map(|i| (i as f64).sqrt()).collect();
        let combo: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| a * x + y).collect();
        let x1 = solve_laplacian(&g, &b1, &cfg).unwrap();
        let x2 = solve_laplacian(&g, &b2, &cfg).unwrap();
        let xc = solve_laplacian(&g, &combo, &cfg).unwrap();
        let expect: Vec<f64> = x1.iter().zip(&x2).map(|(x, y)| a * x + y).collect();
        let scale = expect.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        prop_assert!(max_abs(&xc, &expect) <= 1e-6 * scale);
    }

    #[test]
    fn resistance_below_shortest_path(n in 3usize..30, extra in 0usize..40, seed in any::<u64>()) {
        // unit weights: Res(u, v) never exceeds the hop distance
        let g = random_graph_with_edges(n, n - 1 + extra, (1.0, 1.0), seed).unwrap();
        let res = ResistanceTable::exact(&g, &SolverConfig::default()).unwrap();
        for u in 0..n {
            let d = spd_bellman_ford(&g, u).unwrap();
            for (v, &dv) in d.iter().enumerate() {
                prop_assert!(res.get(u, v) <= dv + 1e-9);
            }
        }
    }

    #[test]
    fn centered_embedding_bounded_by_radius(g in arb_graph(32)) {
        let cfg = SolverConfig::default();
        let emb = exact_embedding(&g, &cfg).unwrap();
        let table = AffinityTable::exact(&g, &cfg).unwrap();
        let m = g.total_weight();
        for u in 0..g.num_nodes() {
            let d2: f64 = emb.vector(u).iter().zip(&emb.mean).map(|(a, b)| (a - b) * (a - b)).sum();
            prop_assert!(d2 <= table.h_max / m + 1e-9);
        }
    }

    #[test]
    fn augmented_wl_refines_plain(g in arb_graph(20)) {
        let cfg = SolverConfig::default();
        let init = vec![0; g.num_nodes()];
        let plain = wl_refine(&g, &init, None, None);
        let colors = affinity_edge_colors(&g, &cfg).unwrap();
        for ec in [&colors.resistance, &colors.hitting, &colors.embedding] {
            let aug = wl_refine(&g, &init, Some(ec), None);
            prop_assert!(aug.refines(&plain));
        }
    }

    #[test]
    fn rotations_are_orthogonal(dim in 1usize..40, seed in any::<u64>()) {
        let r = random_rotation(dim, seed).unwrap();
        prop_assert!(r.orthogonality_error() <= 1e-10);
        let det = r.matrix.determinant();
        prop_assert!((det - 1.0).abs() < 1e-8);
    }
}

#[test]
fn resistance_errors_across_components() {
    let g = Graph::new(4, &[(0, 1, 1.0), (2, 3, 2.0)]).unwrap();
    let cfg = SolverConfig::default();
    assert!(effective_resistance(&g, 0, 2, &cfg).is_err());
    assert!((effective_resistance(&g, 2, 3, &cfg).unwrap() - 0.5).abs() < 1e-12);
}
