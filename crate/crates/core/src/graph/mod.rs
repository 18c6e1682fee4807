//! Weighted undirected graphs with matrix-free Laplacian operators.
//!
//! A [`Graph`] is immutable once built. Parallel edges are merged by summing
//! their weights and every edge is stored with `u < v`, in order of first
//! appearance in the input. The incidence row of edge `e = (u, v)` carries
//! `+1` at `u` and `-1` at `v`, so `Bᵀ C B = L = D - A`.

mod parse;

pub use parse::{parse_edge_list, parse_graph_file, parse_json, to_json, ParsedGraph};

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{AffinityError, Result};

/// An undirected edge with positive conductance `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

#[derive(Debug, Clone)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    // CSR adjacency; `arc_edge[i]` is the index into `edges` of arc i.
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    arc_weight: Vec<f64>,
    arc_edge: Vec<usize>,
    degrees: Vec<f64>,
    total_weight: f64,
    component_of: Vec<usize>,
    components: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, merging parallel edges by weight summation.
    pub fn new(num_nodes: usize, edge_list: &[(usize, usize, f64)]) -> Result<Self> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(edge_list.len());
        let mut edges: Vec<Edge> = Vec::with_capacity(edge_list.len());
        for &(a, b, w) in edge_list {
            for id in [a, b] {
                if id >= num_nodes {
                    return Err(AffinityError::NodeOutOfRange { id, num_nodes });
                }
            }
            if a == b {
                return Err(AffinityError::SelfLoop(a));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(AffinityError::InvalidWeight { u: a, v: b, w });
            }
            let key = (a.min(b), a.max(b));
            match index.get(&key) {
                Some(&e) => edges[e].w += w,
                None => {
                    index.insert(key, edges.len());
                    edges.push(Edge { u: key.0, v: key.1, w });
                }
            }
        }
        Ok(Self::from_merged_edges(num_nodes, edges))
    }

    fn from_merged_edges(num_nodes: usize, edges: Vec<Edge>) -> Self {
        let mut counts = vec![0usize; num_nodes + 1];
        let mut degrees = vec![0.0; num_nodes];
        let mut total_weight = 0.0;
        for e in &edges {
            counts[e.u + 1] += 1;
            counts[e.v + 1] += 1;
            degrees[e.u] += e.w;
            degrees[e.v] += e.w;
            total_weight += e.w;
        }
        for i in 0..num_nodes {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        let mut arc_weight = vec![0.0; 2 * edges.len()];
        let mut arc_edge = vec![0usize; 2 * edges.len()];
        for (idx, e) in edges.iter().enumerate() {
            for (from, to) in [(e.u, e.v), (e.v, e.u)] {
                let slot = cursor[from];
                neighbors[slot] = to;
                arc_weight[slot] = e.w;
                arc_edge[slot] = idx;
                cursor[from] += 1;
            }
        }

        let mut component_of = vec![usize::MAX; num_nodes];
        let mut components = Vec::new();
        let mut stack = Vec::new();
        for start in 0..num_nodes {
            if component_of[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut members = vec![start];
            component_of[start] = id;
            stack.push(start);
            while let Some(x) = stack.pop() {
                for &y in &neighbors[offsets[x]..offsets[x + 1]] {
                    if component_of[y] == usize::MAX {
                        component_of[y] = id;
                        members.push(y);
                        stack.push(y);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }

        Graph {
            num_nodes,
            edges,
            offsets,
            neighbors,
            arc_weight,
            arc_edge,
            degrees,
            total_weight,
            component_of,
            components,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Weighted degree `d_u`.
    pub fn degree(&self, u: usize) -> f64 {
        self.degrees[u]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Total edge weight `M`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Neighbors of `u` with the connecting weight and edge index.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64, usize)> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        range.map(move |i| (self.neighbors[i], self.arc_weight[i], self.arc_edge[i]))
    }

    pub fn unweighted_degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn component_of(&self, u: usize) -> usize {
        self.component_of[u]
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Sorted node ids of component `c`.
    pub fn component(&self, c: usize) -> &[usize] {
        &self.components[c]
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components.len() <= 1
    }

    pub fn same_component(&self, u: usize, v: usize) -> bool {
        self.component_of[u] == self.component_of[v]
    }

    pub fn check_node(&self, id: usize) -> Result<()> {
        if id >= self.num_nodes {
            return Err(AffinityError::NodeOutOfRange { id, num_nodes: self.num_nodes });
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_nodes {
            return Err(AffinityError::DimensionMismatch { expected: self.num_nodes, got: len });
        }
        Ok(())
    }

    /// Stationary distribution of the random walk, `π_u = d_u / 2M`.
    ///
    /// On a graph without edges every entry is zero.
    pub fn stationary_distribution(&self) -> StationaryDistribution {
        let two_m = 2.0 * self.total_weight;
        let pi = if two_m > 0.0 { self.degrees.iter().map(|d| d / two_m).collect() } else { vec![0.0; self.num_nodes] };
        StationaryDistribution { pi }
    }

    /// `y = L x`, one pass over the edges.
    pub fn apply_laplacian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut y = vec![0.0; self.num_nodes];
        self.apply_laplacian_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply_laplacian_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.edges {
            let flow = e.w * (x[e.u] - x[e.v]);
            y[e.u] += flow;
            y[e.v] -= flow;
        }
    }

    /// `C^{1/2} B x`, one entry per edge.
    pub fn apply_weighted_incidence(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(self.edges.iter().map(|e| e.w.sqrt() * (x[e.u] - x[e.v])).collect())
    }

    /// `Bᵀ C^{1/2} z` for an edge vector `z`.
    pub fn apply_weighted_incidence_transpose(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.edges.len() {
            return Err(AffinityError::DimensionMismatch { expected: self.edges.len(), got: z.len() });
        }
        let mut out = vec![0.0; self.num_nodes];
        for (e, &ze) in self.edges.iter().zip(z) {
            let s = e.w.sqrt() * ze;
            out[e.u] += s;
            out[e.v] -= s;
        }
        Ok(out)
    }

    /// Materialized `L`, for the dense paths only.
    pub fn dense_laplacian(&self) -> DMatrix<f64> {
        let n = self.num_nodes;
        let mut l = DMatrix::zeros(n, n);
        for e in &self.edges {
            l[(e.u, e.u)] += e.w;
            l[(e.v, e.v)] += e.w;
            l[(e.u, e.v)] -= e.w;
            l[(e.v, e.u)] -= e.w;
        }
        l
    }

    /// Edge list as `(u, v, w)` triples.
    pub fn edge_triples(&self) -> Vec<(usize, usize, f64)> {
        self.edges.iter().map(|e| (e.u, e.v, e.w)).collect()
    }
}

/// Stationary distribution `π` of the weighted random walk.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn triangle_totals() {
        let g = triangle();
        assert_eq!(g.total_weight(), 3.0);
        assert_eq!(g.degrees(), &[2.0, 2.0, 2.0]);
        assert_eq!(g.num_components(), 1);
    }

    #[test]
    fn path_degrees() {
        let g = Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
        assert_eq!(g.total_weight(), 2.0);
    }

    #[test]
    fn two_components() {
        let g = Graph::new(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(g.components(), &[vec![0, 1], vec![2, 3]]);
        assert!(!g.same_component(1, 2));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Graph::new(2, &[(1, 1, 1.0)]), Err(AffinityError::SelfLoop(1))));
        assert!(matches!(Graph::new(2, &[(0, 1, 0.0)]), Err(AffinityError::InvalidWeight { .. })));
        assert!(matches!(Graph::new(2, &[(0, 1, f64::NAN)]), Err(AffinityError::InvalidWeight { .. })));
        assert!(matches!(Graph::new(2, &[(0, 1, -2.0)]), Err(AffinityError::InvalidWeight { .. })));
        assert!(matches!(Graph::new(2, &[(0, 2, 1.0)]), Err(AffinityError::NodeOutOfRange { id: 2, num_nodes: 2 })));
    }

    #[test]
    fn parallel_edges_merge() {
        let g = Graph::new(2, &[(0, 1, 1.5), (1, 0, 2.5)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edges()[0], Edge { u: 0, v: 1, w: 4.0 });
        assert_eq!(g.total_weight(), 4.0);
    }

    #[test]
    fn stationary_examples() {
        let edge = Graph::new(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(edge.stationary_distribution().pi, vec![0.5, 0.5]);
        let path = Graph::new(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(path.stationary_distribution().pi, vec![0.25, 0.5, 0.25]);
        let pi = triangle().stationary_distribution().pi;
        for p in pi {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_examples() {
        let y = triangle().apply_laplacian(&[1.0, 1.0, 1.0]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-15));

        let edge = Graph::new(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(edge.apply_laplacian(&[1.0, 0.0]).unwrap(), vec![1.0, -1.0]);

        let g = Graph::new(5, &[(0, 1, 2.0), (1, 2, 0.5), (3, 4, 3.0)]).unwrap();
        for comp in g.components() {
            let mut x = vec![0.0; 5];
            for &u in comp {
                x[u] = 1.0;
            }
            assert!(g.apply_laplacian(&x).unwrap().iter().all(|v| v.abs() < 1e-15));
        }
        assert!(matches!(g.apply_laplacian(&[1.0]), Err(AffinityError::DimensionMismatch { expected: 5, got: 1 })));
    }

    #[test]
    fn incidence_factorizes_laplacian() {
        let g = Graph::new(4, &[(0, 1, 2.0), (1, 2, 0.5), (2, 3, 3.0), (0, 3, 1.0)]).unwrap();
        let x = [0.3, -1.2, 2.0, 0.7];
        let cb = g.apply_weighted_incidence(&x).unwrap();
        let btcb = g.apply_weighted_incidence_transpose(&cb).unwrap();
        let lx = g.apply_laplacian(&x).unwrap();
        for (a, b) in btcb.iter().zip(&lx) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
