//! Effective resistances, hitting times, commute times and the hitting-time
//! radius, both exact and from (sketched) resistive embeddings.
//!
//! All quantities are defined per connected component. On a disconnected
//! graph a walk never leaves its component, so hitting times use the
//! component's total weight `M_c` and stationary distribution `d_u / 2M_c`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::{EmbeddingKind, ResistiveEmbedding};
use crate::error::{AffinityError, Result};
use crate::graph::{Graph, StationaryDistribution};
use crate::lapsolve::{dense_pseudoinverse_capped, pcg, LaplacianSolver, SolverConfig};

/// Number of sampled targets when `H_max` is estimated above the oracle cap.
pub const RADIUS_SAMPLE_TARGETS: usize = 64;

fn check_pair(g: &Graph, u: usize, v: usize) -> Result<()> {
    g.check_node(u)?;
    g.check_node(v)?;
    if !g.same_component(u, v) {
        return Err(AffinityError::CrossComponent { u, v });
    }
    Ok(())
}

/// Total edge weight of every component.
pub fn component_weights(g: &Graph) -> Vec<f64> {
    let mut w = vec![0.0; g.num_components()];
    for e in g.edges() {
        w[g.component_of(e.u)] += e.w;
    }
    w
}

/// `Res(u, v) = (1_u − 1_v)ᵀ L† (1_u − 1_v)` with one Laplacian solve.
pub fn effective_resistance(g: &Graph, u: usize, v: usize, cfg: &SolverConfig) -> Result<f64> {
    check_pair(g, u, v)?;
    if u == v {
        return Ok(0.0);
    }
    let mut b = vec![0.0; g.num_nodes()];
    b[u] = 1.0;
    b[v] = -1.0;
    let x = LaplacianSolver::new(g, *cfg)?.solve(&b)?;
    Ok(x[u] - x[v])
}

/// `‖e[u] − e[v]‖²`.
pub fn effective_resistance_from_embedding(e: &ResistiveEmbedding, u: usize, v: usize) -> Result<f64> {
    for id in [u, v] {
        if id >= e.num_nodes() {
            return Err(AffinityError::NodeOutOfRange { id, num_nodes: e.num_nodes() });
        }
    }
    Ok(e.squared_distance(u, v))
}

/// Hitting times into one target.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingTimes {
    pub target: usize,
    /// `times[u] = H_{u,target}`; `f64::INFINITY` outside the target's component.
    pub times: Vec<f64>,
}

impl HittingTimes {
    pub fn is_reachable(&self, u: usize) -> bool {
        self.times[u].is_finite()
    }
}

/// Solves `h(u) = 1 + Σ_w P(u,w) h(w)` with `h(target) = 0`, i.e. the
/// grounded system `L_{SS} h = d_S` on `S = component \ {target}`.
///
/// Dense Cholesky below `cfg.dense_threshold` component nodes, PCG otherwise.
pub fn hitting_time_exact(g: &Graph, target: usize, cfg: &SolverConfig) -> Result<HittingTimes> {
    g.check_node(target)?;
    cfg.validate()?;
    let n = g.num_nodes();
    let mut times = vec![f64::INFINITY; n];
    times[target] = 0.0;
    let comp = g.component(g.component_of(target));
    let interior: Vec<usize> = comp.iter().copied().filter(|&u| u != target).collect();
    if interior.is_empty() {
        return Ok(HittingTimes { target, times });
    }
    // local index of each interior node; usize::MAX elsewhere
    let mut local = vec![usize::MAX; n];
    for (i, &u) in interior.iter().enumerate() {
        local[u] = i;
    }
    let size = interior.len();
    let rhs: Vec<f64> = interior.iter().map(|&u| g.degree(u)).collect();

    let h: Vec<f64> = if comp.len() < cfg.dense_threshold {
        let mut a = DMatrix::<f64>::zeros(size, size);
        for (i, &u) in interior.iter().enumerate() {
            a[(i, i)] = g.degree(u);
            for (w, wt, _) in g.neighbors(u) {
                if local[w] != usize::MAX {
                    a[(i, local[w])] -= wt;
                }
            }
        }
        let chol = a.cholesky().ok_or(AffinityError::NonConvergence { iterations: 0, residual: f64::NAN })?;
        chol.solve(&DVector::from_vec(rhs)).iter().copied().collect()
    } else {
        let inv_diag: Vec<f64> = rhs.iter().map(|d| 1.0 / d).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for (i, &u) in interior.iter().enumerate() {
                let mut acc = g.degree(u) * x[i];
                for (w, wt, _) in g.neighbors(u) {
                    let j = local[w];
                    if j != usize::MAX {
                        acc -= wt * x[j];
                    }
                }
                y[i] = acc;
            }
        };
        pcg(apply, &inv_diag, &rhs, cfg.rel_tolerance, cfg.iteration_cap(size), |_| {})?.x
    };
    for (i, &u) in interior.iter().enumerate() {
        times[u] = h[i];
    }
    Ok(HittingTimes { target, times })
}

/// Hitting-time queries against an embedding, with per-component `M_c`
/// and mean `p_c` precomputed once.
pub struct HittingTimeQuery<'a> {
    embedding: &'a ResistiveEmbedding,
    graph: &'a Graph,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
}

impl<'a> HittingTimeQuery<'a> {
    pub fn new(embedding: &'a ResistiveEmbedding, graph: &'a Graph) -> Result<Self> {
        if embedding.num_nodes() != graph.num_nodes() {
            return Err(AffinityError::DimensionMismatch { expected: graph.num_nodes(), got: embedding.num_nodes() });
        }
        let dim = embedding.dim();
        let weights = component_weights(graph);
        let means = if graph.num_components() == 1 && embedding.mean.len() == dim {
            vec![embedding.mean.clone()]
        } else {
            graph
                .components()
                .iter()
                .zip(&weights)
                .map(|(comp, &mc)| {
                    let mut p = vec![0.0; dim];
                    if mc > 0.0 {
                        for &u in comp {
                            let pi = graph.degree(u) / (2.0 * mc);
                            for (pk, x) in p.iter_mut().zip(embedding.vector(u)) {
                                *pk += pi * x;
                            }
                        }
                    }
                    p
                })
                .collect()
        };
        Ok(HittingTimeQuery { embedding, graph, weights, means })
    }

    /// `2M_c·⟨e[v] − e[u], e[v] − p_c⟩`.
    pub fn hitting_time(&self, u: usize, v: usize) -> Result<f64> {
        check_pair(self.graph, u, v)?;
        if u == v {
            return Ok(0.0);
        }
        let c = self.graph.component_of(u);
        let (ru, rv, p) = (self.embedding.vector(u), self.embedding.vector(v), &self.means[c]);
        let ip: f64 = (0..ru.len()).map(|i| (rv[i] - ru[i]) * (rv[i] - p[i])).sum();
        Ok(2.0 * self.weights[c] * ip)
    }
}

/// Hitting time `u → v` from an exact embedding.
pub fn hitting_time_via_embedding(e: &ResistiveEmbedding, g: &Graph, u: usize, v: usize) -> Result<f64> {
    if e.kind != EmbeddingKind::Exact {
        return Err(AffinityError::WrongEmbeddingKind(
            "sketched embedding passed to the exact hitting-time formula; use approx_hitting_time",
        ));
    }
    HittingTimeQuery::new(e, g)?.hitting_time(u, v)
}

/// `Ĥ_{u,v}` from a sketched embedding; additive error at most `3ε·H_max`
/// with the sketch's success probability.
pub fn approx_hitting_time(e: &ResistiveEmbedding, g: &Graph, u: usize, v: usize) -> Result<f64> {
    HittingTimeQuery::new(e, g)?.hitting_time(u, v)
}

/// Dense pairwise resistance table. Cross-component entries are infinite,
/// missing entries are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceTable {
    n: usize,
    values: Vec<f64>,
}

impl ResistanceTable {
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(AffinityError::DimensionMismatch { expected: n * n, got: values.len() });
        }
        Ok(ResistanceTable { n, values })
    }

    /// Exact table `L†_uu + L†_vv − 2L†_uv` from the dense pseudoinverse.
    pub fn exact(g: &Graph, cfg: &SolverConfig) -> Result<Self> {
        let pinv = dense_pseudoinverse_capped(g, cfg.oracle_cap)?;
        let n = g.num_nodes();
        let mut values = vec![0.0; n * n];
        for u in 0..n {
            for v in 0..n {
                values[u * n + v] = if u == v {
                    0.0
                } else if g.same_component(u, v) {
                    pinv.entry(u, u) + pinv.entry(v, v) - 2.0 * pinv.entry(u, v)
                } else {
                    f64::INFINITY
                };
            }
        }
        Ok(ResistanceTable { n, values })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[u * self.n + v]
    }
}

/// Hitting time via commute times,
/// `H_{u,v} = ½[K_{u,v} + Σ_i π_i (K_{v,i} − K_{u,i})]` with `K = 2M·Res`,
/// the sum running over the pair's component.
pub fn tetali_hitting_time(
    g: &Graph,
    res: &ResistanceTable,
    pi: &StationaryDistribution,
    u: usize,
    v: usize,
) -> Result<f64> {
    check_pair(g, u, v)?;
    if res.num_nodes() != g.num_nodes() || pi.len() != g.num_nodes() {
        return Err(AffinityError::IncompleteTable(format!(
            "table covers {} nodes, distribution {}, graph has {}",
            res.num_nodes(),
            pi.len(),
            g.num_nodes()
        )));
    }
    if u == v {
        return Ok(0.0);
    }
    let c = g.component_of(u);
    let comp = g.component(c);
    let mc: f64 = comp.iter().map(|&i| g.degree(i)).sum::<f64>() / 2.0;
    // π restricted and renormalized to the component
    let mass: f64 = comp.iter().map(|&i| pi.pi[i]).sum();
    let mut sum = 0.0;
    for &i in comp {
        let (rv, ru) = (res.get(v, i), res.get(u, i));
        if !rv.is_finite() || !ru.is_finite() {
            return Err(AffinityError::IncompleteTable(format!("missing entry for node {i}")));
        }
        sum += pi.pi[i] / mass * (rv - ru);
    }
    let ruv = res.get(u, v);
    if !ruv.is_finite() {
        return Err(AffinityError::IncompleteTable(format!("missing entry ({u}, {v})")));
    }
    Ok(mc * (ruv + sum))
}

/// `H_max`, exact or a sampled lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingRadius {
    pub value: f64,
    /// True when only a sample of targets was examined.
    pub lower_bound: bool,
    pub targets: usize,
}

/// Maximum hitting time over ordered pairs within a component.
///
/// Up to `cfg.oracle_cap` nodes every target is solved; above it the max
/// over [`RADIUS_SAMPLE_TARGETS`] uniformly sampled targets is returned and
/// flagged as a lower bound.
pub fn hitting_time_radius(g: &Graph, cfg: &SolverConfig) -> Result<HittingRadius> {
    let n = g.num_nodes();
    let (targets, lower_bound): (Vec<usize>, bool) = if n <= cfg.oracle_cap {
        ((0..n).collect(), false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = sample(&mut rng, n, RADIUS_SAMPLE_TARGETS.min(n)).into_vec();
        t.sort_unstable();
        (t, true)
    };
    let maxima: Vec<f64> = targets
        .par_iter()
        .map(|&t| {
            hitting_time_exact(g, t, cfg).map(|h| h.times.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let value = maxima.into_iter().fold(0.0, f64::max);
    Ok(HittingRadius { value, lower_bound, targets: targets.len() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AffinityKind {
    Exact,
    Approximate { epsilon: f64 },
}

/// Pairwise affinities. `hit[u*n + v] = H_{u,v}`.
#[derive(Debug, Clone)]
pub struct AffinityTable {
    pub n: usize,
    /// Exact tables only.
    pub res: Option<ResistanceTable>,
    pub hit: Vec<f64>,
    pub h_max: f64,
    pub total_weight: f64,
    pub kind: AffinityKind,
}

impl AffinityTable {
    /// Exact table: resistances from `L†`, hitting times from the pinned
    /// linear system, one solve per target.
    pub fn exact(g: &Graph, cfg: &SolverConfig) -> Result<Self> {
        let n = g.num_nodes();
        let res = ResistanceTable::exact(g, cfg)?;
        let columns: Vec<HittingTimes> =
            (0..n).into_par_iter().map(|t| hitting_time_exact(g, t, cfg)).collect::<Result<_>>()?;
        let mut hit = vec![f64::INFINITY; n * n];
        for col in &columns {
            for u in 0..n {
                hit[u * n + col.target] = col.times[u];
            }
        }
        let h_max = hit.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
        Ok(AffinityTable { n, res: Some(res), hit, h_max, total_weight: g.total_weight(), kind: AffinityKind::Exact })
    }

    /// `Ĥ` for every ordered pair from one sketch.
    pub fn approximate(e: &ResistiveEmbedding, g: &Graph) -> Result<Self> {
        let n = g.num_nodes();
        let q = HittingTimeQuery::new(e, g)?;
        let mut hit = vec![f64::INFINITY; n * n];
        for u in 0..n {
            for v in 0..n {
                if g.same_component(u, v) {
                    hit[u * n + v] = q.hitting_time(u, v)?;
                }
            }
        }
        let h_max = hit.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
        let kind = AffinityKind::Approximate { epsilon: e.epsilon.unwrap_or(0.0) };
        Ok(AffinityTable { n, res: None, hit, h_max, total_weight: g.total_weight(), kind })
    }

    pub fn hit(&self, u: usize, v: usize) -> f64 {
        self.hit[u * self.n + v]
    }

    /// `K_{u,v} = H_{u,v} + H_{v,u}`.
    pub fn commute(&self, u: usize, v: usize) -> f64 {
        self.hit(u, v) + self.hit(v, u)
    }
}
