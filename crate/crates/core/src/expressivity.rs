//! 1-WL color refinement with optional edge colors, and the comparison of
//! plain refinement against refinement driven by affinity edge features.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::affinity::{AffinityTable, ResistanceTable};
use crate::embedding::exact_embedding;
use crate::error::Result;
use crate::graph::Graph;
use crate::lapsolve::SolverConfig;
use crate::oracle::counterexample_pair;

/// Quantization tolerance used when continuous features become colors.
pub const QUANTIZE_TOLERANCE: f64 = 1e-9;

/// Edge colors, indexed by the graph's edge order.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeColors {
    /// One color per edge, seen identically from both endpoints.
    Undirected(Vec<usize>),
    /// `(color seen from u, color seen from v)` for edge `(u, v)`, `u < v`.
    Directed(Vec<(usize, usize)>),
}

impl EdgeColors {
    fn seen_from(&self, g: &Graph, edge: usize, from: usize) -> usize {
        match self {
            EdgeColors::Undirected(c) => c[edge],
            EdgeColors::Directed(c) => {
                if g.edges()[edge].u == from {
                    c[edge].0
                } else {
                    c[edge].1
                }
            }
        }
    }
}

/// State of a refinement run.
#[derive(Debug, Clone, PartialEq)]
pub struct Coloring {
    pub node_colors: Vec<usize>,
    /// Canonical coloring after each round, starting with the initial one.
    pub history: Vec<Vec<usize>>,
    /// Rounds that strictly refined the partition.
    pub rounds_to_stabilize: usize,
}

impl Coloring {
    pub fn num_classes(&self) -> usize {
        count_classes(&self.node_colors)
    }

    /// Color classes as sorted node lists, ordered by color id.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (u, &c) in self.node_colors.iter().enumerate() {
            classes.entry(c).or_default().push(u);
        }
        classes.into_values().collect()
    }

    /// True if every class of `self` lies inside a class of `other`.
    pub fn refines(&self, other: &Coloring) -> bool {
        let mut image: BTreeMap<usize, usize> = BTreeMap::new();
        self.node_colors.iter().zip(&other.node_colors).all(|(&a, &b)| *image.entry(a).or_insert(b) == b)
    }
}

fn count_classes(colors: &[usize]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

/// Replaces each signature by its rank among the distinct signatures.
fn canonicalize<T: Ord + Clone>(signatures: &[T]) -> Vec<usize> {
    let mut distinct: Vec<T> = signatures.to_vec();
    distinct.sort();
    distinct.dedup();
    signatures.iter().map(|s| distinct.binary_search(s).expect("signature present")).collect()
}

/// Refines `initial` until the partition stops changing or `max_rounds`
/// rounds have run. A node's new color is determined by its old color and
/// the multiset of `(neighbor color, edge color)` pairs; colors are the ranks
/// of the sorted distinct signatures, so ids depend only on signatures.
pub fn wl_refine(
    g: &Graph,
    initial: &[usize],
    edge_colors: Option<&EdgeColors>,
    max_rounds: Option<usize>,
) -> Coloring {
    let n = g.num_nodes();
    assert_eq!(initial.len(), n, "initial coloring must cover every node");
    let mut colors = canonicalize(initial);
    let mut history = vec![colors.clone()];
    let mut rounds_to_stabilize = 0;
    let limit = max_rounds.unwrap_or(n + 1);
    for _ in 0..limit {
        let signatures: Vec<(usize, Vec<(usize, usize)>)> = (0..n)
            .map(|u| {
                let mut multiset: Vec<(usize, usize)> = g
                    .neighbors(u)
                    .map(|(v, _, e)| (colors[v], edge_colors.map_or(0, |ec| ec.seen_from(g, e, u))))
                    .collect();
                multiset.sort_unstable();
                (colors[u], multiset)
            })
            .collect();
        let next = canonicalize(&signatures);
        let changed = count_classes(&next) != count_classes(&colors);
        colors = next;
        history.push(colors.clone());
        if !changed {
            break;
        }
        rounds_to_stabilize += 1;
    }
    Coloring { node_colors: colors, history, rounds_to_stabilize }
}

/// Gap clustering: sorted values whose consecutive gaps are at most `tol`
/// share a color. Colors are assigned in increasing value order.
pub fn quantize_edge_values(values: &[f64], tol: f64) -> Vec<usize> {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0; values.len()];
    let mut color = 0;
    for (i, &idx) in order.iter().enumerate() {
        if i > 0 && values[idx] - values[order[i - 1]] > tol {
            color += 1;
        }
        out[idx] = color;
    }
    out
}

/// Quantizes each coordinate separately, then colors the coordinate tuples.
pub fn quantize_edge_vectors(values: &[Vec<f64>], tol: f64) -> Vec<usize> {
    let dim = values.first().map_or(0, Vec::len);
    let per_coord: Vec<Vec<usize>> =
        (0..dim).map(|d| quantize_edge_values(&values.iter().map(|v| v[d]).collect::<Vec<_>>(), tol)).collect();
    let tuples: Vec<Vec<usize>> = (0..values.len()).map(|i| per_coord.iter().map(|c| c[i]).collect()).collect();
    canonicalize(&tuples)
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantReport {
    pub name: String,
    pub num_classes: usize,
    pub class_sizes: Vec<usize>,
    pub partition: Vec<Vec<usize>>,
    pub refines_plain: bool,
    pub strictly_refines_plain: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpressivityReport {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub variants: Vec<VariantReport>,
}

impl ExpressivityReport {
    pub fn variant(&self, name: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.name == name)
    }
}

impl fmt::Display for ExpressivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "graph: {} nodes, {} edges", self.num_nodes, self.num_edges)?;
        for v in &self.variants {
            writeln!(
                f,
                "  {:<10} classes={:<3} sizes={:?} strictly_refines_plain={}",
                v.name, v.num_classes, v.class_sizes, v.strictly_refines_plain
            )?;
        }
        Ok(())
    }
}

/// Edge colors for the three affinity variants of one graph.
pub struct AffinityEdgeColors {
    pub resistance: EdgeColors,
    pub hitting: EdgeColors,
    pub embedding: EdgeColors,
}

/// Exact affinities quantized at [`QUANTIZE_TOLERANCE`]. Hitting-time pairs
/// are compared at a tolerance scaled by `max(1, H_max)`.
pub fn affinity_edge_colors(g: &Graph, cfg: &SolverConfig) -> Result<AffinityEdgeColors> {
    let res = ResistanceTable::exact(g, cfg)?;
    let er: Vec<f64> = g.edges().iter().map(|e| res.get(e.u, e.v)).collect();

    let table = AffinityTable::exact(g, cfg)?;
    // arcs 2i (u→v) and 2i+1 (v→u) of edge i
    let arcs: Vec<Vec<f64>> = g
        .edges()
        .iter()
        .flat_map(|e| [vec![table.hit(e.u, e.v), table.hit(e.v, e.u)], vec![table.hit(e.v, e.u), table.hit(e.u, e.v)]])
        .collect();
    let arc_colors = quantize_edge_vectors(&arcs, QUANTIZE_TOLERANCE * table.h_max.max(1.0));
    let hitting =
        EdgeColors::Directed((0..g.num_edges()).map(|i| (arc_colors[2 * i], arc_colors[2 * i + 1])).collect());

    let emb = exact_embedding(g, cfg)?;
    let dist: Vec<f64> = g.edges().iter().map(|e| emb.squared_distance(e.u, e.v)).collect();

    Ok(AffinityEdgeColors {
        resistance: EdgeColors::Undirected(quantize_edge_values(&er, QUANTIZE_TOLERANCE)),
        hitting,
        embedding: EdgeColors::Undirected(quantize_edge_values(&dist, QUANTIZE_TOLERANCE)),
    })
}

/// Runs refinement four ways (plain, and with resistance, hitting-time and
/// embedding-distance edge colors) from a uniform initial coloring.
pub fn expressivity_report(g: &Graph, cfg: &SolverConfig) -> Result<ExpressivityReport> {
    let init = vec![0; g.num_nodes()];
    let plain = wl_refine(g, &init, None, None);
    let colors = affinity_edge_colors(g, cfg)?;
    let runs = [
        ("plain", plain.clone()),
        ("resistance", wl_refine(g, &init, Some(&colors.resistance), None)),
        ("hitting", wl_refine(g, &init, Some(&colors.hitting), None)),
        ("embedding", wl_refine(g, &init, Some(&colors.embedding), None)),
    ];
    let variants = runs
        .into_iter()
        .map(|(name, c)| {
            let partition = c.partition();
            let refines = c.refines(&plain);
            VariantReport {
                name: name.to_string(),
                num_classes: c.num_classes(),
                class_sizes: partition.iter().map(Vec::len).collect(),
                partition,
                refines_plain: refines,
                strictly_refines_plain: refines && c.num_classes() > plain.num_classes(),
            }
        })
        .collect();
    Ok(ExpressivityReport { num_nodes: g.num_nodes(), num_edges: g.num_edges(), variants })
}

/// The cycle/path pair on `4k+1` nodes, compared around `v_0`.
#[derive(Debug, Clone, Serialize)]
pub struct PairWitness {
    pub k: usize,
    /// `v_0 … v_k` and `v_{3k+1} … v_{4k}`.
    pub ball: Vec<usize>,
    /// Plain WL colors after `k` rounds agree node-for-node on the ball.
    pub wl_colors_identical: bool,
    /// `Res(v_0, v_i)` in the cycle and the path, for every ball node.
    pub cycle_resistance: Vec<f64>,
    pub path_resistance: Vec<f64>,
    /// The resistances differ for every ball node other than `v_0`.
    pub resistances_differ: bool,
}

/// Runs `k` rounds of plain WL jointly on the disjoint union of the pair,
/// so colors are comparable across the two graphs.
pub fn counterexample_witness(k: usize, cfg: &SolverConfig) -> Result<PairWitness> {
    let (cycle, path) = counterexample_pair(k)?;
    let n = cycle.num_nodes();
    let mut union_edges = cycle.edge_triples();
    union_edges.extend(path.edges().iter().map(|e| (e.u + n, e.v + n, e.w)));
    let union = Graph::new(2 * n, &union_edges)?;
    let coloring = wl_refine(&union, &vec![0; 2 * n], None, Some(k));

    let ball: Vec<usize> = (0..=k).chain(3 * k + 1..n).collect();
    let wl_colors_identical = ball.iter().all(|&i| coloring.node_colors[i] == coloring.node_colors[i + n]);

    let rc = ResistanceTable::exact(&cycle, cfg)?;
    let rp = ResistanceTable::exact(&path, cfg)?;
    let cycle_resistance: Vec<f64> = ball.iter().map(|&i| rc.get(0, i)).collect();
    let path_resistance: Vec<f64> = ball.iter().map(|&i| rp.get(0, i)).collect();
    let resistances_differ = ball
        .iter()
        .zip(cycle_resistance.iter().zip(&path_resistance))
        .filter(|(&i, _)| i != 0)
        .all(|(_, (a, b))| (a - b).abs() > QUANTIZE_TOLERANCE);
    Ok(PairWitness { k, ball, wl_colors_identical, cycle_resistance, path_resistance, resistances_differ })
}
