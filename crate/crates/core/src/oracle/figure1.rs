//! The 8-node cubic graph whose three automorphism orbits 1-WL cannot tell
//! apart but effective resistances can.
//!
//! [`find_figure1_graph`] rediscovers it from scratch: every labeled cubic
//! graph on 8 nodes is enumerated, connected ones are reduced to
//! isomorphism classes, and the unique class whose orbits have sizes
//! {2, 4, 2} and whose edge resistances match the expected rationals is
//! returned. [`figure1_fixture`] is the frozen result.

use crate::error::{AffinityError, Result};
use crate::graph::Graph;
use crate::lapsolve::dense_pseudoinverse;

const N: usize = 8;

/// Expected edge resistance between orbit classes (0-based class ids).
pub const CLASS_RESISTANCES: [((usize, usize), (u32, u32)); 5] =
    [((0, 0), (2, 3)), ((1, 1), (15, 28)), ((2, 2), (4, 7)), ((0, 1), (185, 336)), ((1, 2), (209, 336))];

/// Class of each node in the fixture: V1 = {0,1}, V2 = {2,3,6,7}, V3 = {4,5}.
pub const FIXTURE_CLASSES: [usize; N] = [0, 0, 1, 1, 2, 2, 1, 1];

const FIXTURE_EDGES: [(usize, usize); 12] =
    [(0, 1), (0, 2), (0, 3), (1, 6), (1, 7), (2, 3), (2, 4), (3, 5), (4, 5), (4, 6), (5, 7), (6, 7)];

pub fn figure1_fixture() -> Graph {
    let edges: Vec<_> = FIXTURE_EDGES.iter().map(|&(u, v)| (u, v, 1.0)).collect();
    Graph::new(N, &edges).expect("fixture is a valid graph")
}

/// The fixture's classes as node lists.
pub fn figure1_classes() -> [Vec<usize>; 3] {
    let mut classes: [Vec<usize>; 3] = Default::default();
    for (u, &c) in FIXTURE_CLASSES.iter().enumerate() {
        classes[c].push(u);
    }
    classes
}

/// Outcome of the search.
#[derive(Debug, Clone)]
pub struct Figure1Graph {
    pub graph: Graph,
    /// Node classes V1, V2, V3 (orbit sizes 2, 4, 2).
    pub classes: [Vec<usize>; 3],
    /// Number of connected cubic graphs on 8 nodes up to isomorphism.
    pub candidates: usize,
    /// Number of labeled cubic graphs generated.
    pub labeled: usize,
}

type Adj = [u8; N];

fn has(adj: &Adj, a: usize, b: usize) -> bool {
    adj[a] & (1 << b) != 0
}

fn enumerate_cubic(adj: &mut Adj, out: &mut Vec<Adj>) {
    let deg = |a: &Adj, i: usize| a[i].count_ones();
    let Some(v) = (0..N).find(|&i| deg(adj, i) < 3) else {
        out.push(*adj);
        return;
    };
    // every node below v is full, so new neighbors of v lie above its current max
    let start = (0..N).rev().find(|&w| has(adj, v, w)).map_or(v + 1, |w| w.max(v) + 1);
    for w in start..N {
        if deg(adj, w) < 3 {
            adj[v] |= 1 << w;
            adj[w] |= 1 << v;
            enumerate_cubic(adj, out);
            adj[v] &= !(1 << w);
            adj[w] &= !(1 << v);
        }
    }
}

fn connected(adj: &Adj) -> bool {
    let mut seen: u8 = 1;
    let mut frontier: u8 = 1;
    while frontier != 0 {
        let mut next = 0u8;
        for (i, &row) in adj.iter().enumerate() {
            if frontier & (1 << i) != 0 {
                next |= row;
            }
        }
        frontier = next & !seen;
        seen |= next;
    }
    seen == u8::MAX
}

/// Calls `f` for every adjacency-preserving bijection `a → b`.
fn for_each_isomorphism(a: &Adj, b: &Adj, f: &mut dyn FnMut(&[usize; N]) -> bool) {
    fn extend(
        a: &Adj,
        b: &Adj,
        map: &mut [usize; N],
        used: u8,
        depth: usize,
        f: &mut dyn FnMut(&[usize; N]) -> bool,
    ) -> bool {
        if depth == N {
            return f(map);
        }
        for img in 0..N {
            if used & (1 << img) != 0 {
                continue;
            }
            if (0..depth).all(|j| has(a, depth, j) == has(b, img, map[j])) {
                map[depth] = img;
                if !extend(a, b, map, used | (1 << img), depth + 1, f) {
                    return false;
                }
            }
        }
        true
    }
    let mut map = [0usize; N];
    extend(a, b, &mut map, 0, 0, f);
}

fn isomorphic(a: &Adj, b: &Adj) -> bool {
    let mut found = false;
    for_each_isomorphism(a, b, &mut |_| {
        found = true;
        false
    });
    found
}

/// Orbit id of every node under the automorphism group.
fn orbits(adj: &Adj) -> [usize; N] {
    let mut orbit: [usize; N] = std::array::from_fn(|i| i);
    for_each_isomorphism(adj, adj, &mut |p| {
        for i in 0..N {
            let (a, b) = (orbit[i], orbit[p[i]]);
            let (lo, hi) = (a.min(b), a.max(b));
            for o in orbit.iter_mut() {
                if *o == hi {
                    *o = lo;
                }
            }
        }
        true
    });
    orbit
}

fn to_graph(adj: &Adj) -> Graph {
    let mut edges = Vec::new();
    for a in 0..N {
        for b in (a + 1)..N {
            if has(adj, a, b) {
                edges.push((a, b, 1.0));
            }
        }
    }
    Graph::new(N, &edges).expect("enumerated graph is valid")
}

fn from_graph(g: &Graph) -> Adj {
    let mut adj = [0u8; N];
    for e in g.edges() {
        adj[e.u] |= 1 << e.v;
        adj[e.v] |= 1 << e.u;
    }
    adj
}

/// Whether two 8-node graphs are isomorphic.
pub fn isomorphic_graphs(a: &Graph, b: &Graph) -> bool {
    a.num_nodes() == N && b.num_nodes() == N && isomorphic(&from_graph(a), &from_graph(b))
}

/// Automorphism orbits of an 8-node graph, as sorted node lists.
pub fn automorphism_orbits(g: &Graph) -> Vec<Vec<usize>> {
    let orbit = orbits(&from_graph(g));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for id in 0..N {
        let members: Vec<usize> = (0..N).filter(|&i| orbit[i] == id).collect();
        if !members.is_empty() {
            out.push(members);
        }
    }
    out
}

/// Checks the orbit/resistance fingerprint; returns the classes on a match.
fn fingerprint(g: &Graph, orbit_lists: &[Vec<usize>]) -> Result<Option<[Vec<usize>; 3]>> {
    let mut sizes: Vec<usize> = orbit_lists.iter().map(Vec::len).collect();
    sizes.sort_unstable();
    if sizes != [2, 2, 4] {
        return Ok(None);
    }
    let pinv = dense_pseudoinverse(g)?;
    let res = |a: usize, b: usize| pinv.entry(a, a) + pinv.entry(b, b) - 2.0 * pinv.entry(a, b);
    let big = orbit_lists.iter().find(|o| o.len() == 4).unwrap().clone();
    let small: Vec<&Vec<usize>> = orbit_lists.iter().filter(|o| o.len() == 2).collect();
    let mut hits = Vec::new();
    for (first, third) in [(0, 1), (1, 0)] {
        let classes = [small[first].clone(), big.clone(), small[third].clone()];
        let class_of = |u: usize| classes.iter().position(|c| c.contains(&u)).unwrap();
        let mut seen = [false; 5];
        let ok = g.edges().iter().all(|e| {
            let (a, b) = (class_of(e.u), class_of(e.v));
            let key = (a.min(b), a.max(b));
            match CLASS_RESISTANCES.iter().position(|&(k, _)| k == key) {
                Some(idx) => {
                    let (p, q) = CLASS_RESISTANCES[idx].1;
                    seen[idx] = true;
                    (res(e.u, e.v) - p as f64 / q as f64).abs() <= 1e-12
                }
                None => false,
            }
        });
        if ok && seen.iter().all(|&s| s) {
            hits.push(classes);
        }
    }
    match hits.len() {
        0 => Ok(None),
        1 => Ok(hits.pop()),
        _ => Err(AffinityError::CubicSearch("both orbit assignments match".into())),
    }
}

/// Enumerates connected cubic graphs on 8 nodes and returns the unique one
/// matching the {2, 4, 2} orbit and resistance fingerprint.
pub fn find_figure1_graph() -> Result<Figure1Graph> {
    let mut labeled = Vec::new();
    enumerate_cubic(&mut [0u8; N], &mut labeled);
    let mut reps: Vec<Adj> = Vec::new();
    for adj in labeled.iter().filter(|a| connected(a)) {
        if !reps.iter().any(|r| isomorphic(r, adj)) {
            reps.push(*adj);
        }
    }
    let mut matches = Vec::new();
    for rep in &reps {
        let g = to_graph(rep);
        let orbit_lists = automorphism_orbits(&g);
        if let Some(classes) = fingerprint(&g, &orbit_lists)? {
            matches.push(Figure1Graph { graph: g, classes, candidates: reps.len(), labeled: labeled.len() });
        }
    }
    match matches.len() {
        1 => Ok(matches.pop().unwrap()),
        0 => Err(AffinityError::CubicSearch(format!("no match among {} cubic graphs", reps.len()))),
        k => Err(AffinityError::CubicSearch(format!("{k} graphs match the fingerprint"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        let mut labeled = Vec::new();
        enumerate_cubic(&mut [0u8; N], &mut labeled);
        // labeled cubic graphs on 8 nodes (OEIS A002829)
        assert_eq!(labeled.len(), 19355);
    }

    #[test]
    fn search_finds_fixture() {
        let found = find_figure1_graph().unwrap();
        assert_eq!(found.candidates, 5);
        assert!(isomorphic_graphs(&found.graph, &figure1_fixture()));
        let sizes: Vec<usize> = found.classes.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 4, 2]);
    }

    #[test]
    fn fixture_orbits_are_the_classes() {
        let g = figure1_fixture();
        for u in 0..N {
            assert_eq!(g.unweighted_degree(u), 3);
        }
        assert!(g.is_connected());
        let mut orbits = automorphism_orbits(&g);
        orbits.sort();
        let mut classes = figure1_classes().to_vec();
        classes.sort();
        assert_eq!(orbits, classes);
        assert!(fingerprint(&g, &automorphism_orbits(&g)).unwrap().is_some());
    }

    #[test]
    fn cube_does_not_match() {
        let cube: Vec<_> = (0..8usize)
            .flat_map(|a| (0..3).map(move |b| (a, a ^ (1 << b))))
            .filter(|(a, b)| a < b)
            .map(|(a, b)| (a, b, 1.0))
            .collect();
        let g = Graph::new(8, &cube).unwrap();
        assert_eq!(automorphism_orbits(&g).len(), 1);
        assert!(fingerprint(&g, &automorphism_orbits(&g)).unwrap().is_none());
    }
}
